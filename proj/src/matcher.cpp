#include "debias/matcher.hpp"

#include <algorithm>
#include <deque>
#include <tuple>

namespace debias {

bool match_order(const RawMatch& a, const RawMatch& b) {
  if (a.char_start != b.char_start) return a.char_start < b.char_start;
  if (a.char_end != b.char_end) return a.char_end > b.char_end;
  if (a.term_id != b.term_id) return a.term_id < b.term_id;
  return std::tie(a.first_token_index, a.last_token_index) <
         std::tie(b.first_token_index, b.last_token_index);
}

MatcherAutomaton::MatcherAutomaton() { nodes_.emplace_back(); }

std::uint32_t MatcherAutomaton::symbol(const std::string& lemma) const {
  auto it = alphabet_.find(lemma);
  return it == alphabet_.end() ? kUnknown : it->second;
}

std::uint32_t MatcherAutomaton::transition(std::uint32_t state, std::uint32_t sym) const {
  while (true) {
    const auto& next = nodes_[state].next;
    if (auto it = next.find(sym); it != next.end()) return it->second;
    if (state == 0) return 0;
    state = nodes_[state].fail;
  }
}

MatcherAutomaton MatcherAutomaton::compile(const TermIndex& index, Language lang) {
  MatcherAutomaton a;
  a.language_ = lang;
  for (const auto& [lemmas, term_ids] : index.patterns(lang)) {
    std::uint32_t state = 0;
    for (const auto& lemma : lemmas) {
      auto [sym_it, inserted] = a.alphabet_.emplace(lemma, static_cast<std::uint32_t>(a.alphabet_.size()));
      const std::uint32_t sym = sym_it->second;
      auto found = a.nodes_[state].next.find(sym);
      if (found == a.nodes_[state].next.end()) {
        const auto id = static_cast<std::uint32_t>(a.nodes_.size());
        a.nodes_[state].next.emplace(sym, id);
        Node node;
        node.depth = a.nodes_[state].depth + 1;
        a.nodes_.push_back(std::move(node));
        state = id;
      } else {
        state = found->second;
      }
    }
    auto& ids = a.nodes_[state].term_ids;
    ids.insert(ids.end(), term_ids.begin(), term_ids.end());
    a.pattern_count_ += term_ids.size();
  }

  std::deque<std::uint32_t> queue;
  for (const auto& [sym, child] : a.nodes_[0].next) {
    a.nodes_[child].fail = 0;
    a.nodes_[child].output_link = 0;
    queue.push_back(child);
  }
  while (!queue.empty()) {
    const std::uint32_t s = queue.front();
    queue.pop_front();
    for (const auto& [sym, child] : a.nodes_[s].next) {
      std::uint32_t f = a.nodes_[s].fail;
      while (f != 0 && !a.nodes_[f].next.contains(sym)) f = a.nodes_[f].fail;
      auto it = a.nodes_[f].next.find(sym);
      const std::uint32_t fail = (it != a.nodes_[f].next.end() && it->second != child) ? it->second : 0;
      a.nodes_[child].fail = fail;
      a.nodes_[child].output_link =
          a.nodes_[fail].term_ids.empty() ? a.nodes_[fail].output_link : fail;
      queue.push_back(child);
    }
  }
  return a;
}

namespace {

struct Symbol {
  std::uint32_t id;
  std::size_t token;
};

}  // namespace

std::vector<RawMatch> find_matches(const LemmatizedDocument& doc, const MatcherAutomaton& automaton) {
  std::vector<RawMatch> out;
  if (automaton.pattern_count() == 0 || doc.tokens.empty()) return out;

  std::vector<std::uint32_t> symbols;
  std::vector<Symbol> segment;

  auto run = [&](bool compound) {
    if (segment.empty()) return;
    symbols.clear();
    for (const auto& s : segment) symbols.push_back(s.id);
    automaton.scan(symbols, [&](std::size_t end, std::size_t length, const std::vector<std::string>& ids) {
      const std::size_t first = segment[end + 1 - length].token;
      const std::size_t last = segment[end].token;
      std::vector<std::string> lemmas;
      if (compound) {
        const auto& comp = doc.tokens[first].lemmas;
        lemmas.assign(comp.begin() + static_cast<std::ptrdiff_t>(end + 1 - length),
                      comp.begin() + static_cast<std::ptrdiff_t>(end + 1));
      } else {
        for (std::size_t k = end + 1 - length; k <= end; ++k) lemmas.push_back(doc.tokens[segment[k].token].lemmas[0]);
      }
      for (const auto& id : ids) {
        RawMatch m;
        m.term_id = id;
        m.first_token_index = first;
        m.last_token_index = last;
        m.char_start = doc.tokens[first].token.char_start;
        m.char_end = doc.tokens[last].token.char_end;
        m.matched_lemmas = lemmas;
        m.via_compound = compound;
        out.push_back(std::move(m));
      }
    });
    segment.clear();
  };

  for (std::size_t t = 0; t < doc.tokens.size(); ++t) {
    const auto& tok = doc.tokens[t];
    if (tok.is_compound()) {
      run(false);
      for (const auto& lemma : tok.lemmas) segment.push_back({automaton.symbol(lemma), t});
      run(true);
      continue;
    }
    // Punctuation is a barrier for multi-token patterns.
    const std::uint32_t id =
        tok.token.kind == TokenKind::punctuation ? MatcherAutomaton::kUnknown : automaton.symbol(tok.lemmas[0]);
    segment.push_back({id, t});
  }
  run(false);

  // A pattern repeated inside one compound maps to the same span; report once.
  std::sort(out.begin(), out.end(), match_order);
  out.erase(std::unique(out.begin(), out.end(),
                        [](const RawMatch& a, const RawMatch& b) {
                          return a.term_id == b.term_id && a.char_start == b.char_start &&
                                 a.char_end == b.char_end;
                        }),
            out.end());
  return out;
}

}  // namespace debias
