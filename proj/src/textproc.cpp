#include "debias/textproc.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "debias/errors.hpp"
#include "debias/unicode.hpp"

namespace debias {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::word: return "word";
    case TokenKind::punctuation: return "punctuation";
    case TokenKind::number: return "number";
    case TokenKind::other: return "other";
  }
  return "other";
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

struct CodePoint {
  char32_t cp;
  std::size_t byte;
};

bool is_word_char(char32_t cp) {
  return unicode::is_letter(cp) || unicode::is_digit(cp) || unicode::is_mark(cp);
}

bool is_number_separator(char32_t cp) { return cp == U'.' || cp == U','; }

Token make_token(std::string_view text, const std::vector<CodePoint>& cps, std::size_t begin,
                 std::size_t end, TokenKind kind) {
  Token t;
  t.char_start = begin;
  t.char_end = end;
  t.byte_start = cps[begin].byte;
  t.byte_end = end < cps.size() ? cps[end].byte : text.size();
  t.surface = std::string(text.substr(t.byte_start, t.byte_end - t.byte_start));
  t.kind = kind;
  return t;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text, Language lang) {
  std::vector<CodePoint> cps;
  cps.reserve(text.size());
  for (std::size_t pos = 0; pos < text.size();) {
    const std::size_t at = pos;
    cps.push_back({unicode::next_code_point(text, pos), at});
  }

  std::vector<Token> tokens;
  const std::size_t n = cps.size();
  std::size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i].cp;
    if (unicode::is_space(c)) {
      ++i;
      continue;
    }
    if (!is_word_char(c)) {
      tokens.push_back(make_token(text, cps, i, i + 1,
                                  unicode::is_punctuation(c) ? TokenKind::punctuation : TokenKind::other));
      ++i;
      continue;
    }

    bool has_letter = false;
    bool only_digits = true;
    std::vector<std::size_t> apostrophes;
    std::size_t j = i;
    while (j < n) {
      const char32_t cur = cps[j].cp;
      if (is_word_char(cur)) {
        if (unicode::is_letter(cur)) has_letter = true;
        if (!unicode::is_digit(cur)) only_digits = false;
        ++j;
        continue;
      }
      if (j + 1 >= n || j == i) break;
      const char32_t prev = cps[j - 1].cp;
      const char32_t next = cps[j + 1].cp;
      if (unicode::is_hyphen(cur) && is_word_char(prev) && is_word_char(next)) {
        only_digits = false;
        ++j;
        continue;
      }
      if (unicode::is_apostrophe(cur) && unicode::is_letter(prev) && unicode::is_letter(next)) {
        apostrophes.push_back(j);
        only_digits = false;
        ++j;
        continue;
      }
      if (is_number_separator(cur) && unicode::is_digit(prev) && unicode::is_digit(next)) {
        ++j;
        continue;
      }
      break;
    }

    const TokenKind kind = has_letter ? TokenKind::word
                           : only_digits ? TokenKind::number
                                         : TokenKind::other;
    if (kind == TokenKind::word && has_apostrophe_clitics(lang) && !apostrophes.empty()) {
      std::size_t start = i;
      for (std::size_t apos : apostrophes) {
        tokens.push_back(make_token(text, cps, start, apos + 1, TokenKind::word));
        start = apos + 1;
      }
      tokens.push_back(make_token(text, cps, start, j, TokenKind::word));
    } else {
      tokens.push_back(make_token(text, cps, i, j, kind));
    }
    i = j;
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Word lists and rule files

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(trim(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start)));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

// Calls fn(fields, line_number) for every non-blank, non-comment line.
template <typename Fn>
void for_each_tsv_line(const std::filesystem::path& path, std::size_t expected_fields, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != expected_fields) {
      throw ParseError(path.filename().string() + ": expected " + std::to_string(expected_fields) +
                           " tab-separated fields",
                       number, 1);
    }
    fn(fields, number);
  }
}

Language language_field(const std::string& value, const std::filesystem::path& path, std::size_t line) {
  auto lang = parse_language(value);
  if (!lang) throw ParseError(path.filename().string() + ": unknown language '" + value + "'", line, 1);
  return *lang;
}

}  // namespace

WordList::WordList(std::vector<std::string> words) {
  for (const auto& w : words) insert(w);
}

WordList WordList::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dictionary " + path.string());
  WordList list;
  std::string line;
  while (std::getline(in, line)) {
    const std::string word = trim(line);
    if (word.empty() || word.front() == '#') continue;
    list.insert(word);
  }
  return list;
}

void WordList::insert(std::string_view word) { words_.insert(unicode::to_lower(word)); }

bool WordList::contains(std::string_view lowercase_word) const {
  return words_.find(lowercase_word) != words_.end();
}

std::vector<LemmaRule> load_lemma_rules(const std::filesystem::path& path) {
  std::vector<LemmaRule> rules;
  for_each_tsv_line(path, 3, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f[1].empty() || f[2].empty()) throw ParseError(path.filename().string() + ": empty form or lemma", line, 1);
    rules.push_back({language_field(f[0], path, line), unicode::to_lower(f[1]), unicode::to_lower(f[2])});
  });
  return rules;
}

std::vector<SuffixRule> load_suffix_rules(const std::filesystem::path& path) {
  std::vector<SuffixRule> rules;
  for_each_tsv_line(path, 4, [&](const std::vector<std::string>& f, std::size_t line) {
    SuffixRule r;
    r.language = language_field(f[0], path, line);
    r.suffix = unicode::to_lower(f[1]);
    r.replacement = unicode::to_lower(f[2]);
    try {
      r.min_stem_length = static_cast<std::size_t>(std::stoul(f[3]));
    } catch (const std::exception&) {
      throw ParseError(path.filename().string() + ": bad min_stem_length '" + f[3] + "'", line, 1);
    }
    rules.push_back(std::move(r));
  });
  return rules;
}

std::vector<std::pair<std::string, std::string>> load_lexicon(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> entries;
  for_each_tsv_line(path, 2, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f[0].empty() || f[1].empty()) throw ParseError(path.filename().string() + ": empty form or lemma", line, 1);
    entries.emplace_back(unicode::to_lower(f[0]), unicode::to_lower(f[1]));
  });
  return entries;
}

// ---------------------------------------------------------------------------
// Compound splitting

LinkingRules LinkingRules::for_language(Language lang) {
  switch (lang) {
    case Language::de: return {{"s", "es", "n", "en", "er", "e"}, 4};
    case Language::nl: return {{"s", "en", "e"}, 4};
    default: return {{}, 4};
  }
}

namespace {

struct Segmentation {
  std::vector<std::size_t> lengths;       // component lengths, code points
  std::vector<std::size_t> linker_lengths;

  std::size_t parts() const { return lengths.size(); }
};

// True when a is preferable to b.
bool better(const Segmentation& a, const Segmentation& b) {
  if (a.parts() != b.parts()) return a.parts() < b.parts();
  if (a.lengths != b.lengths) return std::lexicographical_compare(
      b.lengths.begin(), b.lengths.end(), a.lengths.begin(), a.lengths.end());
  return a.linker_lengths < b.linker_lengths;
}

}  // namespace

std::optional<CompoundSplit> split_compound(std::string_view word, Language lang,
                                            const WordList& dictionary, const LinkingRules& rules) {
  if (!is_compounding(lang)) return std::nullopt;
  const std::u32string original = unicode::decode(word);
  const std::size_t n = original.size();
  const std::size_t min_len = std::max<std::size_t>(rules.min_component_length, 1);

  std::string lower;
  std::vector<std::size_t> offset(n + 1);  // byte offset of each code point in `lower`
  for (std::size_t i = 0; i < n; ++i) {
    offset[i] = lower.size();
    unicode::append_utf8(lower, unicode::to_lower(original[i]));
  }
  offset[n] = lower.size();
  auto slice = [&](std::size_t b, std::size_t e) {
    return std::string_view(lower).substr(offset[b], offset[e] - offset[b]);
  };

  if (dictionary.contains(lower)) return std::nullopt;
  if (n < 2 * min_len) return std::nullopt;

  std::vector<std::u32string> linkers;
  linkers.emplace_back();
  for (const auto& m : rules.morphemes) linkers.push_back(unicode::decode(m));

  // best[i]: preferred segmentation of the suffix starting at code point i.
  std::vector<std::optional<Segmentation>> best(n + 1);
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + min_len; j <= n; ++j) {
      if (!dictionary.contains(slice(i, j))) continue;
      if (j == n) {
        Segmentation s{{j - i}, {}};
        if (!best[i] || better(s, *best[i])) best[i] = std::move(s);
        continue;
      }
      for (const auto& link : linkers) {
        const std::size_t next = j + link.size();
        if (next >= n || !best[next]) continue;
        bool same = true;
        for (std::size_t k = 0; k < link.size(); ++k) {
          if (unicode::to_lower(original[j + k]) != link[k]) {
            same = false;
            break;
          }
        }
        if (!same) continue;
        Segmentation s;
        s.lengths.push_back(j - i);
        s.lengths.insert(s.lengths.end(), best[next]->lengths.begin(), best[next]->lengths.end());
        s.linker_lengths.push_back(link.size());
        s.linker_lengths.insert(s.linker_lengths.end(), best[next]->linker_lengths.begin(),
                                best[next]->linker_lengths.end());
        if (!best[i] || better(s, *best[i])) best[i] = std::move(s);
      }
    }
  }

  if (!best[0] || best[0]->parts() < 2) return std::nullopt;

  CompoundSplit split;
  std::size_t pos = 0;
  const auto& seg = *best[0];
  for (std::size_t k = 0; k < seg.parts(); ++k) {
    split.components.push_back(unicode::encode(std::u32string_view(original).substr(pos, seg.lengths[k])));
    pos += seg.lengths[k];
    if (k < seg.linker_lengths.size()) {
      split.linkers.push_back(
          unicode::encode(std::u32string_view(original).substr(pos, seg.linker_lengths[k])));
      pos += seg.linker_lengths[k];
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// Lemmatizer

void Lemmatizer::add_rule(const LemmaRule& rule) {
  if (rule.match_form.empty() || rule.lemma.empty()) throw Error("lemma rule with empty form or lemma");
  auto& t = tables_[rule.language];
  t.custom[unicode::to_lower(rule.match_form)] = unicode::to_lower(rule.lemma);
  t.known_lemmas.insert(unicode::to_lower(rule.lemma));
}

void Lemmatizer::add_lexicon_entry(Language lang, std::string_view form, std::string_view lemma) {
  auto& t = tables_[lang];
  t.lexicon[unicode::to_lower(form)] = unicode::to_lower(lemma);
  t.known_lemmas.insert(unicode::to_lower(lemma));
}

void Lemmatizer::add_suffix_rule(const SuffixRule& rule) {
  if (rule.suffix.empty()) throw Error("suffix rule with empty suffix");
  if (unicode::count_code_points(rule.replacement) > unicode::count_code_points(rule.suffix)) {
    throw Error("suffix rule '" + rule.suffix + "' -> '" + rule.replacement +
                "' lengthens the word; replacements must not be longer than the suffix");
  }
  auto& rules = tables_[rule.language].suffixes;
  SuffixRule r = rule;
  r.suffix = unicode::to_lower(r.suffix);
  r.replacement = unicode::to_lower(r.replacement);
  auto pos = std::find_if(rules.begin(), rules.end(), [&](const SuffixRule& existing) {
    return unicode::count_code_points(existing.suffix) < unicode::count_code_points(r.suffix);
  });
  rules.insert(pos, std::move(r));
}

std::optional<std::string> Lemmatizer::custom_lemma(std::string_view form, Language lang) const {
  auto t = tables_.find(lang);
  if (t == tables_.end()) return std::nullopt;
  auto it = t->second.custom.find(form);
  if (it == t->second.custom.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> Lemmatizer::lexicon_lemma(std::string_view form, Language lang) const {
  auto t = tables_.find(lang);
  if (t == tables_.end()) return std::nullopt;
  auto it = t->second.lexicon.find(form);
  if (it == t->second.lexicon.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> Lemmatizer::suffix_lemma(std::string_view form, Language lang) const {
  auto t = tables_.find(lang);
  if (t == tables_.end()) return std::nullopt;
  for (const auto& rule : t->second.suffixes) {
    if (form.size() < rule.suffix.size() || !form.ends_with(rule.suffix)) continue;
    const std::string_view stem = form.substr(0, form.size() - rule.suffix.size());
    if (unicode::count_code_points(stem) < rule.min_stem_length) continue;
    return std::string(stem) + rule.replacement;
  }
  return std::nullopt;
}

std::optional<std::string> Lemmatizer::step(std::string_view form, const Tables& t) const {
  if (auto it = t.custom.find(form); it != t.custom.end()) return it->second;
  if (auto it = t.lexicon.find(form); it != t.lexicon.end()) return it->second;
  if (t.known_lemmas.contains(form)) return std::nullopt;
  for (const auto& rule : t.suffixes) {
    if (form.size() < rule.suffix.size() || !form.ends_with(rule.suffix)) continue;
    const std::string_view stem = form.substr(0, form.size() - rule.suffix.size());
    if (unicode::count_code_points(stem) < rule.min_stem_length) continue;
    return std::string(stem) + rule.replacement;
  }
  return std::nullopt;
}

std::string Lemmatizer::lemmatize(std::string_view form, Language lang) const {
  auto t = tables_.find(lang);
  if (t == tables_.end()) return std::string(form);
  std::vector<std::string> path{std::string(form)};
  while (true) {
    auto next = step(path.back(), t->second);
    if (!next || *next == path.back()) return path.back();
    auto seen = std::find(path.begin(), path.end(), *next);
    if (seen != path.end()) {
      // Rule cycle: the smallest member represents every form on the cycle.
      return *std::min_element(seen, path.end());
    }
    path.push_back(std::move(*next));
  }
}

std::size_t Lemmatizer::rule_count(Language lang) const {
  auto t = tables_.find(lang);
  return t == tables_.end() ? 0 : t->second.custom.size();
}

// ---------------------------------------------------------------------------
// Resources and preprocessing

const LanguageResources& TextResources::at(Language lang) const {
  auto it = languages.find(lang);
  if (it == languages.end())
    throw Error("no text resources loaded for language '" + std::string(to_string(lang)) + "'");
  return it->second;
}

TextResources TextResources::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("dictionary directory not found: " + dir.string());
  TextResources res;
  for (Language lang : kAllLanguages) {
    const std::string code(to_string(lang));
    const fs::path dic = dir / (code + ".dic");
    if (!fs::exists(dic)) continue;
    LanguageResources lr;
    lr.dictionary = WordList::load(dic);
    lr.linking = LinkingRules::for_language(lang);
    res.languages.emplace(lang, std::move(lr));
    const fs::path lex = dir / (code + ".lex");
    if (fs::exists(lex)) {
      for (const auto& [form, lemma] : load_lexicon(lex)) res.lemmatizer.add_lexicon_entry(lang, form, lemma);
    }
  }
  if (const fs::path p = dir / "lemma_rules.tsv"; fs::exists(p)) {
    for (const auto& rule : load_lemma_rules(p)) res.lemmatizer.add_rule(rule);
  }
  if (const fs::path p = dir / "suffix_rules.tsv"; fs::exists(p)) {
    for (const auto& rule : load_suffix_rules(p)) res.lemmatizer.add_suffix_rule(rule);
  }
  return res;
}

LemmatizedDocument preprocess(std::string_view text, Language lang, const TextResources& resources) {
  const LanguageResources& lr = resources.at(lang);
  LemmatizedDocument doc;
  doc.text = std::string(text);
  doc.language = lang;
  auto tokens = tokenize(text, lang);
  doc.tokens.reserve(tokens.size());
  for (auto& token : tokens) {
    LemmatizedToken lt;
    if (token.kind == TokenKind::word) {
      std::optional<CompoundSplit> split;
      if (is_compounding(lang)) split = split_compound(token.surface, lang, lr.dictionary, lr.linking);
      if (split) {
        lt.components = std::move(split->components);
        lt.linkers = std::move(split->linkers);
      } else {
        lt.components.push_back(token.surface);
      }
      for (const auto& c : lt.components)
        lt.lemmas.push_back(resources.lemmatizer.lemmatize(unicode::to_lower(c), lang));
    } else {
      lt.components.push_back(token.surface);
      lt.lemmas.push_back(unicode::to_lower(token.surface));
    }
    lt.token = std::move(token);
    const std::size_t index = doc.tokens.size();
    for (const auto& lemma : lt.lemmas) doc.flat_lemmas.push_back({lemma, index});
    doc.tokens.push_back(std::move(lt));
  }
  return doc;
}

LabelLemmatizer make_label_lemmatizer(const TextResources& resources) {
  return [&resources](std::string_view label, Language lang) {
    // Punctuation inside a label would act as a match barrier; drop it.
    auto doc = preprocess(label, lang, resources);
    std::vector<std::string> lemmas;
    for (auto& fl : doc.flat_lemmas) {
      if (doc.tokens[fl.token_index].token.kind == TokenKind::punctuation) continue;
      lemmas.push_back(std::move(fl.lemma));
    }
    return lemmas;
  };
}

}  // namespace debias
