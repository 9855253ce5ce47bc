#pragma once

// Reference implementations used to check the production code. They favour
// obviousness over speed and share no logic with the library.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "debias/matcher.hpp"
#include "debias/textproc.hpp"

namespace debias::oracle {

using MatchKey = std::tuple<std::string, std::size_t, std::size_t, bool>;  // term, start, end, via_compound

/// Tries every pattern at every token window. A window may not contain a
/// compound token; inside a compound every run of component lemmas is tried.
inline std::set<MatchKey> brute_force_matches(const LemmatizedDocument& doc,
                                              const std::map<std::vector<std::string>, std::vector<std::string>>& patterns) {
  std::set<MatchKey> out;
  const auto& toks = doc.tokens;
  for (const auto& [lemmas, ids] : patterns) {
    const std::size_t n = lemmas.size();
    if (n == 0) continue;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      bool ok = true;
      for (std::size_t k = 0; k < n && ok; ++k) {
        const auto& t = toks[i + k];
        ok = t.lemmas.size() == 1 && t.lemmas[0] == lemmas[k];
      }
      if (!ok) continue;
      for (const auto& id : ids) out.emplace(id, toks[i].token.char_start, toks[i + n - 1].token.char_end, false);
    }
    for (const auto& t : toks) {
      if (t.lemmas.size() < 2) continue;
      for (std::size_t i = 0; i + n <= t.lemmas.size(); ++i) {
        if (std::equal(lemmas.begin(), lemmas.end(), t.lemmas.begin() + static_cast<std::ptrdiff_t>(i))) {
          for (const auto& id : ids) out.emplace(id, t.token.char_start, t.token.char_end, true);
        }
      }
    }
  }
  return out;
}

inline std::set<MatchKey> keys(const std::vector<RawMatch>& matches) {
  std::set<MatchKey> out;
  for (const auto& m : matches) out.emplace(m.term_id, m.char_start, m.char_end, m.via_compound);
  return out;
}

/// Fewest dictionary components (each at least `min_len` code points) that
/// spell `word` with an optional linker between neighbours; 0 when there is
/// no such segmentation. Exhaustive search over all split points.
inline std::size_t min_components(const std::u32string& word, std::size_t min_len,
                                  const std::set<std::u32string>& dict, const std::vector<std::u32string>& linkers) {
  std::size_t best = 0;
  // (position, components so far)
  std::vector<std::pair<std::size_t, std::size_t>> stack = {{0, 0}};
  while (!stack.empty()) {
    auto [pos, count] = stack.back();
    stack.pop_back();
    for (std::size_t end = pos + min_len; end <= word.size(); ++end) {
      if (!dict.contains(word.substr(pos, end - pos))) continue;
      if (end == word.size()) {
        if (best == 0 || count + 1 < best) best = count + 1;
        continue;
      }
      stack.push_back({end, count + 1});
      for (const auto& l : linkers) {
        if (!l.empty() && word.compare(end, l.size(), l) == 0 && end + l.size() < word.size())
          stack.push_back({end + l.size(), count + 1});
      }
    }
  }
  return best;
}

}  // namespace debias::oracle
