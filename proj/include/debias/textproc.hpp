#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "debias/language.hpp"
#include "debias/vocabulary.hpp"

namespace debias {

enum class TokenKind { word, punctuation, number, other };

std::string_view to_string(TokenKind kind);

/// A slice of the original text. char_* offsets count Unicode scalar values,
/// byte_* offsets index the UTF-8 buffer; both are end-exclusive.
struct Token {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  TokenKind kind = TokenKind::word;

  bool operator==(const Token&) const = default;
};

/// Splits on whitespace and punctuation. Hyphenated words stay whole; in
/// French and Italian an elided clitic ("l'", "dell'") becomes its own token.
std::vector<Token> tokenize(std::string_view text, Language lang);

struct TransparentStringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

/// Lowercased word set loaded from a word-per-line file.
class WordList {
 public:
  WordList() = default;
  explicit WordList(std::vector<std::string> words);

  /// UTF-8, one word per line, '#' starts a comment line.
  static WordList load(const std::filesystem::path& path);

  void insert(std::string_view word);
  bool contains(std::string_view lowercase_word) const;
  std::size_t size() const { return words_.size(); }
  const std::unordered_set<std::string, TransparentStringHash, std::equal_to<>>& words() const {
    return words_;
  }

 private:
  std::unordered_set<std::string, TransparentStringHash, std::equal_to<>> words_;
};

/// Linking morphemes allowed between compound components.
struct LinkingRules {
  std::vector<std::string> morphemes;
  std::size_t min_component_length = 4;

  /// de: s es n en er e; nl: s en e; others: none.
  static LinkingRules for_language(Language lang);
};

/// components.size() == linkers.size() + 1; linkers[i] sits between
/// components[i] and components[i + 1] and may be empty.
struct CompoundSplit {
  std::vector<std::string> components;
  std::vector<std::string> linkers;

  bool operator==(const CompoundSplit&) const = default;
};

/// Decomposes `word` into dictionary words joined by linking morphemes.
/// Prefers the fewest components, then the longest first component (and so
/// on left to right), then the shortest linkers. Components keep the
/// original casing. Returns nullopt for non-compounding languages, when the
/// word itself is a dictionary word, or when no segmentation satisfies the
/// minimum component length.
std::optional<CompoundSplit> split_compound(std::string_view word, Language lang,
                                            const WordList& dictionary, const LinkingRules& rules);

struct LemmaRule {
  Language language = Language::en;
  std::string match_form;
  std::string lemma;
};

struct SuffixRule {
  Language language = Language::en;
  std::string suffix;
  std::string replacement;
  std::size_t min_stem_length = 1;
};

/// TSV `language<TAB>form<TAB>lemma`.
std::vector<LemmaRule> load_lemma_rules(const std::filesystem::path& path);
/// TSV `language<TAB>suffix<TAB>replacement<TAB>min_stem_length`.
std::vector<SuffixRule> load_suffix_rules(const std::filesystem::path& path);
/// Full-form lexicon, TSV `form<TAB>lemma`.
std::vector<std::pair<std::string, std::string>> load_lexicon(const std::filesystem::path& path);

/// Layered lemmatizer: custom rules, then the full-form lexicon, then suffix
/// rules, then identity. The layers are applied until the form stops
/// changing, so lemmatize(lemmatize(w)) == lemmatize(w). A lemma produced
/// by a custom rule or the lexicon is never suffix-stripped further.
class Lemmatizer {
 public:
  void add_rule(const LemmaRule& rule);
  void add_lexicon_entry(Language lang, std::string_view form, std::string_view lemma);
  /// Throws Error when the replacement is longer than the suffix.
  void add_suffix_rule(const SuffixRule& rule);

  std::string lemmatize(std::string_view form, Language lang) const;

  // Single-layer lookups.
  std::optional<std::string> custom_lemma(std::string_view form, Language lang) const;
  std::optional<std::string> lexicon_lemma(std::string_view form, Language lang) const;
  std::optional<std::string> suffix_lemma(std::string_view form, Language lang) const;

  std::size_t rule_count(Language lang) const;

 private:
  struct Tables {
    std::unordered_map<std::string, std::string, TransparentStringHash, std::equal_to<>> custom;
    std::unordered_map<std::string, std::string, TransparentStringHash, std::equal_to<>> lexicon;
    // Lemmas emitted by custom rules or the lexicon.
    std::unordered_set<std::string, TransparentStringHash, std::equal_to<>> known_lemmas;
    // Longest suffix first.
    std::vector<SuffixRule> suffixes;
  };

  std::optional<std::string> step(std::string_view form, const Tables& t) const;

  std::map<Language, Tables> tables_;
};

struct LanguageResources {
  WordList dictionary;
  LinkingRules linking;
};

/// Dictionaries and rule tables for every loaded language. Immutable after
/// loading and safe to share between threads.
struct TextResources {
  std::map<Language, LanguageResources> languages;
  Lemmatizer lemmatizer;

  bool supports(Language lang) const { return languages.contains(lang); }
  const LanguageResources& at(Language lang) const;

  /// Reads `<lang>.dic`, optional `<lang>.lex`, `lemma_rules.tsv` and
  /// `suffix_rules.tsv` from `dir`.
  static TextResources load(const std::filesystem::path& dir);
};

struct LemmatizedToken {
  Token token;
  std::vector<std::string> components;
  /// Linking morphemes consumed between components (empty when unsplit).
  std::vector<std::string> linkers;
  std::vector<std::string> lemmas;

  bool is_compound() const { return components.size() > 1; }
};

struct FlatLemma {
  std::string lemma;
  std::size_t token_index = 0;

  bool operator==(const FlatLemma&) const = default;
};

struct LemmatizedDocument {
  std::string text;
  Language language = Language::en;
  std::vector<LemmatizedToken> tokens;
  std::vector<FlatLemma> flat_lemmas;
};

/// tokenize -> split compounds (de, nl) -> lowercase and lemmatize every
/// component. Non-word tokens carry their lowercased surface as lemma.
LemmatizedDocument preprocess(std::string_view text, Language lang, const TextResources& resources);

/// Lemma sequence of a vocabulary label under the same processing as
/// documents.
LabelLemmatizer make_label_lemmatizer(const TextResources& resources);

}  // namespace debias
