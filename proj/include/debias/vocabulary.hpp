#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "debias/language.hpp"

namespace debias {

/// A contentious word or phrase. Each term links to exactly one issue;
/// synonyms, gendered forms and spelling variants share an issue.
struct ContentiousTerm {
  std::string id;
  std::string label;
  Language language = Language::en;
  std::string issue_id;
  bool ambiguous = false;
  std::optional<std::string> variant_group;
  std::vector<std::string> cross_language_links;
  /// Fields not part of the schema, carried through serialization untouched.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const ContentiousTerm&) const = default;
};

/// Contextual explanation shared by one or more terms.
struct ContentiousIssue {
  std::string id;
  std::string description;
  std::string suggestion_note;
  std::vector<std::string> suggested_terms;
  std::vector<std::string> categories;
  std::vector<std::string> sources;
  std::string modified;
  std::string version;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const ContentiousIssue&) const = default;
};

/// The vocabulary knowledge graph. Immutable once constructed.
class VocabularyGraph {
 public:
  VocabularyGraph() = default;
  VocabularyGraph(std::string format_version, std::vector<ContentiousTerm> terms,
                  std::vector<ContentiousIssue> issues,
                  nlohmann::json extra = nlohmann::json::object());

  const std::string& format_version() const { return format_version_; }
  const std::vector<ContentiousTerm>& terms() const { return terms_; }
  const std::vector<ContentiousIssue>& issues() const { return issues_; }
  const nlohmann::json& extra() const { return extra_; }

  /// First record with the id, or null.
  const ContentiousTerm* find_term(std::string_view id) const;
  const ContentiousIssue* find_issue(std::string_view id) const;

 private:
  std::string format_version_ = "1.0";
  std::vector<ContentiousTerm> terms_;
  std::vector<ContentiousIssue> issues_;
  nlohmann::json extra_ = nlohmann::json::object();
  std::unordered_map<std::string, std::size_t> term_by_id_;
  std::unordered_map<std::string, std::size_t> issue_by_id_;
};

enum class VocabFormat { json };

/// Parses a vocabulary. Unknown fields are kept in `extra` and reported in
/// `warnings` when given. Throws ParseError or SchemaError.
VocabularyGraph load_vocabulary(std::istream& source, VocabFormat format = VocabFormat::json,
                                std::vector<std::string>* warnings = nullptr);
VocabularyGraph load_vocabulary_file(const std::filesystem::path& path,
                                     std::vector<std::string>* warnings = nullptr);

nlohmann::json vocabulary_to_json(const VocabularyGraph& graph);
std::string serialize_vocabulary(const VocabularyGraph& graph);

enum class ViolationKind {
  dangling_issue_ref,
  duplicate_id,
  empty_label,
  same_language_link,
  empty_description,
  duplicate_category,
  dangling_cross_link,
  asymmetric_cross_link,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string record_id;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  /// Suspicious but tolerated, e.g. a one-directional cross-language link.
  std::vector<Violation> warnings;

  bool ok() const { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

ValidationReport validate(const VocabularyGraph& graph);

/// The issue linked to a term; carries the suggestion note, suggested terms
/// and categories. Throws NotFoundError for an unknown term id.
const ContentiousIssue& lookup_issue(const VocabularyGraph& graph, std::string_view term_id);

struct VocabStats {
  std::size_t total_terms = 0;
  std::size_t total_issues = 0;
  std::map<Language, std::size_t> terms_per_language;
  std::size_t ambiguous_terms = 0;
  /// ambiguous_terms / total_terms, 0 for an empty graph.
  double ambiguous_fraction = 0.0;
};

VocabStats stats(const VocabularyGraph& graph);
nlohmann::json to_json(const VocabStats& s);

/// Turns a term label into its lemma sequence, using the same text
/// processing as documents.
using LabelLemmatizer = std::function<std::vector<std::string>(std::string_view label, Language)>;

using LemmaSequence = std::vector<std::string>;

/// Lemma-sequence lookup over the terms of a set of languages.
class TermIndex {
 public:
  struct Entry {
    const LemmaSequence* lemmas;
    const std::string* term_id;
  };

  void add_language(Language lang) { by_language_[lang]; }
  void add(Language lang, LemmaSequence lemmas, std::string term_id, bool ambiguous);

  bool covers(Language lang) const { return by_language_.contains(lang); }
  /// Lemma sequence -> term ids (in vocabulary order) for one language.
  const std::map<LemmaSequence, std::vector<std::string>>& patterns(Language lang) const;
  /// One entry per indexed term.
  std::vector<Entry> entries(Language lang) const;
  std::size_t term_count(Language lang) const;

  bool is_ambiguous(std::string_view term_id) const;
  const LemmaSequence* lemma_sequence(std::string_view term_id) const;

 private:
  std::map<Language, std::map<LemmaSequence, std::vector<std::string>>> by_language_;
  std::unordered_map<std::string, bool> ambiguous_;
  std::unordered_map<std::string, LemmaSequence> lemmas_by_term_;
};

/// Throws IndexingError when a label lemmatizes to nothing.
TermIndex build_term_index(const VocabularyGraph& graph, const LabelLemmatizer& lemmatizer,
                           std::span<const Language> languages);

}  // namespace debias
