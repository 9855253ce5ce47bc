#include "debias/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <iterator>
#include <set>
#include <sstream>

#include "debias/errors.hpp"

namespace debias {

using nlohmann::json;

VocabularyGraph::VocabularyGraph(std::string format_version, std::vector<ContentiousTerm> terms,
                                 std::vector<ContentiousIssue> issues, json extra)
    : format_version_(std::move(format_version)),
      terms_(std::move(terms)),
      issues_(std::move(issues)),
      extra_(std::move(extra)) {
  for (std::size_t i = 0; i < terms_.size(); ++i) term_by_id_.emplace(terms_[i].id, i);
  for (std::size_t i = 0; i < issues_.size(); ++i) issue_by_id_.emplace(issues_[i].id, i);
}

const ContentiousTerm* VocabularyGraph::find_term(std::string_view id) const {
  auto it = term_by_id_.find(std::string(id));
  return it == term_by_id_.end() ? nullptr : &terms_[it->second];
}

const ContentiousIssue* VocabularyGraph::find_issue(std::string_view id) const {
  auto it = issue_by_id_.find(std::string(id));
  return it == issue_by_id_.end() ? nullptr : &issues_[it->second];
}

namespace {

const std::set<std::string, std::less<>> kIssueFields = {
    "id", "description", "suggestion_note", "suggested_terms", "categories",
    "sources", "modified", "version"};
const std::set<std::string, std::less<>> kTermFields = {
    "id", "label", "language", "issue_id", "ambiguous", "variant_group", "cross_language_links"};
const std::set<std::string, std::less<>> kTopFields = {"format_version", "issues", "terms"};

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  const std::size_t end = std::min(byte, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

std::string record_id_of(const json& record) {
  auto it = record.find("id");
  if (it != record.end() && it->is_string()) return it->get<std::string>();
  return "<unknown>";
}

std::string required_string(const json& record, const char* field, const std::string& rid) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) throw SchemaError(field, rid, "missing required field");
  if (!it->is_string()) throw SchemaError(field, rid, "expected a string");
  return it->get<std::string>();
}

std::string optional_string(const json& record, const char* field, const std::string& rid) {
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return {};
  if (!it->is_string()) throw SchemaError(field, rid, "expected a string");
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& record, const char* field, const std::string& rid) {
  std::vector<std::string> out;
  auto it = record.find(field);
  if (it == record.end() || it->is_null()) return out;
  if (!it->is_array()) throw SchemaError(field, rid, "expected an array of strings");
  for (const auto& v : *it) {
    if (!v.is_string()) throw SchemaError(field, rid, "expected an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

json collect_extra(const json& record, const std::set<std::string, std::less<>>& known,
                   const std::string& where, std::vector<std::string>* warnings) {
  json extra = json::object();
  for (auto it = record.begin(); it != record.end(); ++it) {
    if (known.contains(it.key())) continue;
    extra[it.key()] = it.value();
    if (warnings) warnings->push_back("unknown field '" + it.key() + "' in " + where + " (preserved)");
  }
  return extra;
}

ContentiousIssue parse_issue(const json& record, std::vector<std::string>* warnings) {
  if (!record.is_object()) throw SchemaError("issues", "<unknown>", "issue record is not an object");
  const std::string rid = record_id_of(record);
  ContentiousIssue issue;
  issue.id = required_string(record, "id", rid);
  issue.description = required_string(record, "description", rid);
  issue.suggestion_note = optional_string(record, "suggestion_note", rid);
  issue.suggested_terms = string_list(record, "suggested_terms", rid);
  issue.categories = string_list(record, "categories", rid);
  issue.sources = string_list(record, "sources", rid);
  issue.modified = optional_string(record, "modified", rid);
  issue.version = optional_string(record, "version", rid);
  issue.extra = collect_extra(record, kIssueFields, "issue '" + rid + "'", warnings);
  return issue;
}

ContentiousTerm parse_term(const json& record, std::vector<std::string>* warnings) {
  if (!record.is_object()) throw SchemaError("terms", "<unknown>", "term record is not an object");
  const std::string rid = record_id_of(record);
  ContentiousTerm term;
  term.id = required_string(record, "id", rid);
  term.label = required_string(record, "label", rid);
  const std::string lang = required_string(record, "language", rid);
  const auto parsed = parse_language(lang);
  if (!parsed) throw SchemaError("language", rid, "unsupported language '" + lang + "'");
  term.language = *parsed;
  term.issue_id = required_string(record, "issue_id", rid);
  if (auto it = record.find("ambiguous"); it != record.end() && !it->is_null()) {
    if (!it->is_boolean()) throw SchemaError("ambiguous", rid, "expected a boolean");
    term.ambiguous = it->get<bool>();
  }
  if (auto it = record.find("variant_group"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("variant_group", rid, "expected a string or null");
    term.variant_group = it->get<std::string>();
  }
  term.cross_language_links = string_list(record, "cross_language_links", rid);
  term.extra = collect_extra(record, kTermFields, "term '" + rid + "'", warnings);
  return term;
}

}  // namespace

VocabularyGraph load_vocabulary(std::istream& source, VocabFormat format,
                                std::vector<std::string>* warnings) {
  if (format != VocabFormat::json) throw Error("unsupported vocabulary format");
  const std::string text{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports the 1-based byte index of the offending character.
    const std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    auto [line, column] = line_and_column(text, byte);
    throw ParseError("malformed vocabulary JSON", line, column);
  }
  if (!doc.is_object()) throw SchemaError("<root>", "<root>", "vocabulary must be a JSON object");

  std::string format_version = "1.0";
  if (auto it = doc.find("format_version"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) throw SchemaError("format_version", "<root>", "expected a string");
    format_version = it->get<std::string>();
  }

  std::vector<ContentiousIssue> issues;
  if (auto it = doc.find("issues"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("issues", "<root>", "expected an array");
    for (const auto& rec : *it) issues.push_back(parse_issue(rec, warnings));
  } else {
    throw SchemaError("issues", "<root>", "missing required field");
  }

  std::vector<ContentiousTerm> terms;
  if (auto it = doc.find("terms"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("terms", "<root>", "expected an array");
    for (const auto& rec : *it) terms.push_back(parse_term(rec, warnings));
  } else {
    throw SchemaError("terms", "<root>", "missing required field");
  }

  json extra = collect_extra(doc, kTopFields, "vocabulary root", warnings);
  return VocabularyGraph(std::move(format_version), std::move(terms), std::move(issues),
                         std::move(extra));
}

VocabularyGraph load_vocabulary_file(const std::filesystem::path& path,
                                     std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open vocabulary file " + path.string());
  return load_vocabulary(in, VocabFormat::json, warnings);
}

json vocabulary_to_json(const VocabularyGraph& graph) {
  json doc = graph.extra();
  doc["format_version"] = graph.format_version();
  json issues = json::array();
  for (const auto& issue : graph.issues()) {
    json rec = issue.extra;
    rec["id"] = issue.id;
    rec["description"] = issue.description;
    rec["suggestion_note"] = issue.suggestion_note;
    rec["suggested_terms"] = issue.suggested_terms;
    rec["categories"] = issue.categories;
    rec["sources"] = issue.sources;
    rec["modified"] = issue.modified;
    rec["version"] = issue.version;
    issues.push_back(std::move(rec));
  }
  json terms = json::array();
  for (const auto& term : graph.terms()) {
    json rec = term.extra;
    rec["id"] = term.id;
    rec["label"] = term.label;
    rec["language"] = std::string(to_string(term.language));
    rec["issue_id"] = term.issue_id;
    rec["ambiguous"] = term.ambiguous;
    rec["variant_group"] = term.variant_group ? json(*term.variant_group) : json(nullptr);
    rec["cross_language_links"] = term.cross_language_links;
    terms.push_back(std::move(rec));
  }
  doc["issues"] = std::move(issues);
  doc["terms"] = std::move(terms);
  return doc;
}

std::string serialize_vocabulary(const VocabularyGraph& graph) {
  return vocabulary_to_json(graph).dump(2);
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::dangling_issue_ref: return "dangling_issue_ref";
    case ViolationKind::duplicate_id: return "duplicate_id";
    case ViolationKind::empty_label: return "empty_label";
    case ViolationKind::same_language_link: return "same_language_link";
    case ViolationKind::empty_description: return "empty_description";
    case ViolationKind::duplicate_category: return "duplicate_category";
    case ViolationKind::dangling_cross_link: return "dangling_cross_link";
    case ViolationKind::asymmetric_cross_link: return "asymmetric_cross_link";
  }
  return "unknown";
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [kind](const Violation& v) { return v.kind == kind; }));
}

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

}  // namespace

ValidationReport validate(const VocabularyGraph& graph) {
  ValidationReport report;
  auto add = [&report](ViolationKind kind, const std::string& id, std::string msg) {
    report.violations.push_back({kind, id, std::move(msg)});
  };

  std::set<std::string> seen_issue_ids;
  for (const auto& issue : graph.issues()) {
    if (!seen_issue_ids.insert(issue.id).second)
      add(ViolationKind::duplicate_id, issue.id, "issue id used more than once");
    if (is_blank(issue.description))
      add(ViolationKind::empty_description, issue.id, "issue description is empty");
    std::set<std::string> cats;
    for (const auto& c : issue.categories) {
      if (!cats.insert(c).second)
        add(ViolationKind::duplicate_category, issue.id, "category '" + c + "' listed twice");
    }
  }

  std::set<std::string> seen_term_ids;
  for (const auto& term : graph.terms()) {
    if (!seen_term_ids.insert(term.id).second)
      add(ViolationKind::duplicate_id, term.id, "term id used more than once");
    if (is_blank(term.label)) add(ViolationKind::empty_label, term.id, "term label is empty");
    if (!graph.find_issue(term.issue_id))
      add(ViolationKind::dangling_issue_ref, term.id,
          "issue_id '" + term.issue_id + "' does not resolve");
    for (const auto& link : term.cross_language_links) {
      const ContentiousTerm* other = graph.find_term(link);
      if (!other) {
        report.warnings.push_back({ViolationKind::dangling_cross_link, term.id,
                                   "cross-language link '" + link + "' does not resolve"});
        continue;
      }
      if (other->language == term.language) {
        add(ViolationKind::same_language_link, term.id,
            "cross-language link '" + link + "' targets the same language");
        continue;
      }
      const auto& back = other->cross_language_links;
      if (std::find(back.begin(), back.end(), term.id) == back.end()) {
        report.warnings.push_back({ViolationKind::asymmetric_cross_link, term.id,
                                   "link to '" + link + "' is not reciprocated"});
      }
    }
  }
  return report;
}

const ContentiousIssue& lookup_issue(const VocabularyGraph& graph, std::string_view term_id) {
  const ContentiousTerm* term = graph.find_term(term_id);
  if (!term) throw NotFoundError("unknown term id '" + std::string(term_id) + "'");
  const ContentiousIssue* issue = graph.find_issue(term->issue_id);
  if (!issue)
    throw NotFoundError("term '" + term->id + "' links to missing issue '" + term->issue_id + "'");
  return *issue;
}

VocabStats stats(const VocabularyGraph& graph) {
  VocabStats s;
  s.total_terms = graph.terms().size();
  s.total_issues = graph.issues().size();
  for (Language lang : kAllLanguages) s.terms_per_language[lang] = 0;
  for (const auto& term : graph.terms()) {
    ++s.terms_per_language[term.language];
    if (term.ambiguous) ++s.ambiguous_terms;
  }
  s.ambiguous_fraction =
      s.total_terms == 0 ? 0.0 : static_cast<double>(s.ambiguous_terms) / static_cast<double>(s.total_terms);
  return s;
}

json to_json(const VocabStats& s) {
  json per = json::object();
  for (const auto& [lang, n] : s.terms_per_language) per[std::string(to_string(lang))] = n;
  return {{"total_terms", s.total_terms},
          {"total_issues", s.total_issues},
          {"terms_per_language", per},
          {"ambiguous_terms", s.ambiguous_terms},
          {"ambiguous_fraction", s.ambiguous_fraction}};
}

void TermIndex::add(Language lang, LemmaSequence lemmas, std::string term_id, bool ambiguous) {
  ambiguous_[term_id] = ambiguous;
  lemmas_by_term_[term_id] = lemmas;
  by_language_[lang][std::move(lemmas)].push_back(std::move(term_id));
}

const std::map<LemmaSequence, std::vector<std::string>>& TermIndex::patterns(Language lang) const {
  static const std::map<LemmaSequence, std::vector<std::string>> kEmpty;
  auto it = by_language_.find(lang);
  return it == by_language_.end() ? kEmpty : it->second;
}

std::vector<TermIndex::Entry> TermIndex::entries(Language lang) const {
  std::vector<Entry> out;
  for (const auto& [lemmas, ids] : patterns(lang)) {
    for (const auto& id : ids) out.push_back({&lemmas, &id});
  }
  return out;
}

std::size_t TermIndex::term_count(Language lang) const {
  std::size_t n = 0;
  for (const auto& [lemmas, ids] : patterns(lang)) n += ids.size();
  return n;
}

bool TermIndex::is_ambiguous(std::string_view term_id) const {
  auto it = ambiguous_.find(std::string(term_id));
  return it != ambiguous_.end() && it->second;
}

const LemmaSequence* TermIndex::lemma_sequence(std::string_view term_id) const {
  auto it = lemmas_by_term_.find(std::string(term_id));
  return it == lemmas_by_term_.end() ? nullptr : &it->second;
}

TermIndex build_term_index(const VocabularyGraph& graph, const LabelLemmatizer& lemmatizer,
                           std::span<const Language> languages) {
  TermIndex index;
  for (Language lang : languages) index.add_language(lang);
  std::set<std::string> done;
  for (const auto& term : graph.terms()) {
    if (std::find(languages.begin(), languages.end(), term.language) == languages.end()) continue;
    // Duplicate ids are a validation failure; index the first occurrence only.
    if (!done.insert(term.id).second) continue;
    LemmaSequence lemmas = lemmatizer(term.label, term.language);
    if (lemmas.empty()) throw IndexingError(term.id, "label '" + term.label + "' yields no lemmas");
    index.add(term.language, std::move(lemmas), term.id, term.ambiguous);
  }
  return index;
}

}  // namespace debias
