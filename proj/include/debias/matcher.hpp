#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "debias/language.hpp"
#include "debias/textproc.hpp"
#include "debias/vocabulary.hpp"

namespace debias {

/// A vocabulary hit. The character span covers whole tokens, including the
/// full compound token when the match lies among its components.
struct RawMatch {
  std::string term_id;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::size_t first_token_index = 0;
  std::size_t last_token_index = 0;
  std::vector<std::string> matched_lemmas;
  bool via_compound = false;

  bool operator==(const RawMatch&) const = default;
};

/// Document order: char_start ascending, longer span first, then term id.
bool match_order(const RawMatch& a, const RawMatch& b);

/// Token-level Aho-Corasick automaton over lemma sequences.
class MatcherAutomaton {
 public:
  MatcherAutomaton();

  static MatcherAutomaton compile(const TermIndex& index, Language lang);

  Language language() const { return language_; }
  std::size_t pattern_count() const { return pattern_count_; }

  /// Reports every pattern occurrence ending at each position of `symbols`.
  /// Calls on_match(end_position_inclusive, pattern_length, term_ids).
  template <typename Fn>
  void scan(const std::vector<std::uint32_t>& symbols, Fn&& on_match) const;

  /// Symbol id of a lemma, kUnknown when no pattern uses it.
  std::uint32_t symbol(const std::string& lemma) const;

  static constexpr std::uint32_t kUnknown = UINT32_MAX;

 private:
  struct Node {
    std::unordered_map<std::uint32_t, std::uint32_t> next;
    std::uint32_t fail = 0;
    // Nearest proper suffix node that ends a pattern.
    std::uint32_t output_link = 0;
    std::uint32_t depth = 0;
    std::vector<std::string> term_ids;
  };

  std::uint32_t transition(std::uint32_t state, std::uint32_t sym) const;

  Language language_ = Language::en;
  std::size_t pattern_count_ = 0;
  std::unordered_map<std::string, std::uint32_t> alphabet_;
  std::vector<Node> nodes_;
};

template <typename Fn>
void MatcherAutomaton::scan(const std::vector<std::uint32_t>& symbols, Fn&& on_match) const {
  std::uint32_t state = 0;
  for (std::size_t pos = 0; pos < symbols.size(); ++pos) {
    state = symbols[pos] == kUnknown ? 0 : transition(state, symbols[pos]);
    for (std::uint32_t s = state; s != 0; s = nodes_[s].output_link) {
      if (!nodes_[s].term_ids.empty()) on_match(pos, nodes_[s].depth, nodes_[s].term_ids);
    }
  }
}

/// Every occurrence of every pattern, overlaps included. A multi-token
/// pattern matches either among ordinary (unsplit) tokens, where intervening
/// punctuation tokens break it, or entirely inside one compound token.
std::vector<RawMatch> find_matches(const LemmatizedDocument& doc, const MatcherAutomaton& automaton);

}  // namespace debias
