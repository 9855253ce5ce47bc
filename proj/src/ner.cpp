#include "debias/ner.hpp"

#include <algorithm>
#include <array>

#include <httplib.h>
#include <json.hpp>

#include "debias/errors.hpp"
#include "debias/unicode.hpp"
#include "http_util.hpp"

namespace debias {

std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::person: return "person";
    case EntityKind::location: return "location";
    case EntityKind::organization: return "organization";
    case EntityKind::other: return "other";
  }
  return "other";
}

EntityKind parse_entity_kind(std::string_view s) {
  const std::string k = unicode::to_lower(s);
  if (k == "person" || k == "per") return EntityKind::person;
  if (k == "location" || k == "loc" || k == "gpe") return EntityKind::location;
  if (k == "organization" || k == "org") return EntityKind::organization;
  return EntityKind::other;
}

namespace {

bool is_capitalized_word(const Token& t) {
  if (t.kind != TokenKind::word || t.surface.empty()) return false;
  std::size_t pos = 0;
  return unicode::is_uppercase(unicode::next_code_point(t.surface, pos));
}

bool is_sentence_final(const Token& t) {
  static constexpr std::array<std::string_view, 4> kFinal = {".", "!", "?", "…"};
  return t.kind == TokenKind::punctuation &&
         std::find(kFinal.begin(), kFinal.end(), t.surface) != kFinal.end();
}

bool is_opening_punctuation(const Token& t) {
  static constexpr std::array<std::string_view, 9> kOpening = {"\"", "'", "(", "[", "«", "„", "“", "‘", "¿"};
  return t.kind == TokenKind::punctuation &&
         std::find(kOpening.begin(), kOpening.end(), t.surface) != kOpening.end();
}

bool is_sentence_initial(const LemmatizedDocument& doc, std::size_t index) {
  std::size_t i = index;
  while (i > 0 && is_opening_punctuation(doc.tokens[i - 1].token)) --i;
  return i == 0 || is_sentence_final(doc.tokens[i - 1].token);
}

bool known_word(const LemmatizedToken& t, const WordList& dictionary) {
  // A token that split into dictionary components is an ordinary word.
  if (t.is_compound()) return true;
  if (dictionary.contains(unicode::to_lower(t.token.surface))) return true;
  return std::any_of(t.lemmas.begin(), t.lemmas.end(),
                     [&](const std::string& lemma) { return dictionary.contains(lemma); });
}

}  // namespace

std::vector<EntitySpan> HeuristicNerBackend::detect(const LemmatizedDocument& doc) const {
  std::vector<EntitySpan> spans;
  const WordList& dictionary = resources_->at(doc.language).dictionary;
  const auto& tokens = doc.tokens;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!is_capitalized_word(tokens[i].token)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tokens.size() && is_capitalized_word(tokens[j].token)) ++j;
    // A run made only of dictionary words ("Third World") is a title-cased
    // phrase rather than a name.
    const bool all_known = std::all_of(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                       tokens.begin() + static_cast<std::ptrdiff_t>(j),
                                       [&](const LemmatizedToken& t) { return known_word(t, dictionary); });
    if (j - i >= 2 && !all_known) {
      spans.push_back({tokens[i].token.char_start, tokens[j - 1].token.char_end, EntityKind::other,
                       EntitySource::heuristic});
    } else if (j - i == 1 && !is_sentence_initial(doc, i) && !all_known) {
      spans.push_back({tokens[i].token.char_start, tokens[i].token.char_end, EntityKind::other,
                       EntitySource::heuristic});
    }
    i = j;
  }
  return spans;
}

HttpNerBackend::HttpNerBackend(std::string endpoint, int timeout_ms, int max_in_flight)
    : endpoint_(std::move(endpoint)),
      timeout_ms_(timeout_ms),
      in_flight_(std::clamp(max_in_flight, 1, 1024)) {}

std::vector<EntitySpan> HttpNerBackend::detect(const LemmatizedDocument& doc) const {
  const auto url = detail::parse_url(endpoint_);
  const nlohmann::json body = {{"text", doc.text}, {"language", std::string(to_string(doc.language))}};

  in_flight_.acquire();
  httplib::Result res;
  {
    httplib::Client client(url.origin);
    const auto timeout = std::chrono::milliseconds(timeout_ms_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    res = client.Post(url.path, body.dump(), "application/json");
  }
  in_flight_.release();

  if (!res) throw BackendError(endpoint_, httplib::to_string(res.error()));
  if (res->status != 200) throw BackendError(endpoint_, "HTTP status " + std::to_string(res->status));

  const std::size_t length = unicode::count_code_points(doc.text);
  std::vector<EntitySpan> spans;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    for (const auto& e : reply.at("entities")) {
      const auto start = e.at("start").get<std::int64_t>();
      const auto end = e.at("end").get<std::int64_t>();
      if (start < 0 || end <= start || static_cast<std::size_t>(end) > length) {
        throw BackendError(endpoint_, "entity span [" + std::to_string(start) + ", " + std::to_string(end) +
                                          ") outside the submitted text");
      }
      EntityKind kind = EntityKind::other;
      if (auto k = e.find("kind"); k != e.end() && k->is_string()) kind = parse_entity_kind(k->get<std::string>());
      spans.push_back({static_cast<std::size_t>(start), static_cast<std::size_t>(end), kind,
                       EntitySource::external});
    }
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(endpoint_, std::string("malformed response: ") + e.what());
  }
  return spans;
}

std::vector<EntitySpan> detect_entities(const LemmatizedDocument& doc, const NerBackend& backend) {
  auto spans = backend.detect(doc);
  std::sort(spans.begin(), spans.end(), [](const EntitySpan& a, const EntitySpan& b) {
    return a.char_start != b.char_start ? a.char_start < b.char_start : a.char_end > b.char_end;
  });
  std::vector<EntitySpan> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.char_start < merged.back().char_end) {
      merged.back().char_end = std::max(merged.back().char_end, s.char_end);
      continue;
    }
    merged.push_back(s);
  }
  return merged;
}

FilterResult filter_matches(const std::vector<RawMatch>& matches, const std::vector<EntitySpan>& entities) {
  FilterResult result;
  for (const auto& m : matches) {
    const bool inside = std::any_of(entities.begin(), entities.end(), [&](const EntitySpan& e) {
      return m.char_start < e.char_end && e.char_start < m.char_end;
    });
    (inside ? result.dropped : result.kept).push_back(m);
  }
  return result;
}

}  // namespace debias
