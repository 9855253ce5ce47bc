#include <gtest/gtest.h>

#include "debias/matcher.hpp"
#include "debias/resources.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace debias;

namespace {

const Resources& res() { return *debias::testing::bundled(); }

std::vector<RawMatch> match(std::string_view text, Language lang) {
  return find_matches(preprocess(text, lang, res().text()), res().automaton(lang));
}

MatcherAutomaton compile_patterns(std::vector<std::pair<LemmaSequence, std::string>> patterns) {
  TermIndex index;
  index.add_language(Language::en);
  for (auto& [lemmas, id] : patterns) index.add(Language::en, lemmas, id, false);
  return MatcherAutomaton::compile(index, Language::en);
}

}  // namespace

TEST(Compile, EmptyIndexMatchesNothing) {
  TermIndex index;
  index.add_language(Language::en);
  const auto automaton = MatcherAutomaton::compile(index, Language::en);
  EXPECT_EQ(automaton.pattern_count(), 0u);
  EXPECT_TRUE(find_matches(preprocess("the Third World race", Language::en, res().text()), automaton).empty());
}

TEST(Compile, TwoPatterns) {
  const auto automaton = compile_patterns({{{"third", "world"}, "t2"}, {{"caucasian"}, "t1"}});
  EXPECT_EQ(automaton.pattern_count(), 2u);
}

TEST(FindMatches, MultiTokenTerm) {
  const auto matches = match("countries of the Third World", Language::en);
  ASSERT_EQ(matches.size(), 1u);
  EXPECT_EQ(matches[0].term_id, "term:0002");
  EXPECT_EQ(matches[0].char_start, 17u);
  EXPECT_EQ(matches[0].char_end, 28u);
  EXPECT_FALSE(matches[0].via_compound);
  EXPECT_EQ(matches[0].matched_lemmas, (std::vector<std::string>{"third", "world"}));
}

TEST(FindMatches, OrderMatters) { EXPECT_TRUE(match("world third", Language::en).empty()); }

TEST(FindMatches, Empty) { EXPECT_TRUE(match("", Language::en).empty()); }

TEST(FindMatches, PunctuationIsABarrier) {
  EXPECT_TRUE(match("the third. World", Language::en).empty());
  EXPECT_EQ(match("the third world.", Language::en).size(), 1u);
}

TEST(FindMatches, InflectedFormsMatch) {
  const auto matches = match("posters about mixing of the races", Language::en);
  ASSERT_EQ(matches.size(), 1u);
  EXPECT_EQ(matches[0].term_id, "term:0005");
  EXPECT_EQ(matches[0].char_start, 28u);
  EXPECT_EQ(matches[0].char_end, 33u);
}

TEST(FindMatches, CompoundMatchCoversWholeToken) {
  const auto matches = match("Fotografie von Mischlingskindern", Language::de);
  ASSERT_EQ(matches.size(), 1u);
  EXPECT_EQ(matches[0].term_id, "term:0008");
  EXPECT_TRUE(matches[0].via_compound);
  EXPECT_EQ(matches[0].char_start, 15u);
  EXPECT_EQ(matches[0].char_end, 32u);
}

TEST(FindMatches, OverlappingPatternsAllReported) {
  const auto automaton = compile_patterns({{{"a", "b"}, "ab"}, {{"b", "c"}, "bc"}, {{"b"}, "b"}, {{"a", "b", "c"}, "abc"}});
  TextResources text;
  text.languages[Language::en] = {};
  const auto doc = preprocess("a b c", Language::en, text);
  const auto matches = find_matches(doc, automaton);
  std::vector<std::string> ids;
  for (const auto& m : matches) ids.push_back(m.term_id);
  // char_start ascending, longer span first.
  EXPECT_EQ(ids, (std::vector<std::string>{"abc", "ab", "bc", "b"}));
}

TEST(FindMatches, SpansSliceTheOriginalText) {
  const std::string text = "Les indigènes et l'indigène, race Caucasian.";
  for (Language lang : {Language::fr, Language::en}) {
    const auto doc = preprocess(text, lang, res().text());
    for (const auto& m : find_matches(doc, res().automaton(lang))) {
      EXPECT_LT(m.char_start, m.char_end);
      EXPECT_EQ(m.char_start, doc.tokens[m.first_token_index].token.char_start);
      EXPECT_EQ(m.char_end, doc.tokens[m.last_token_index].token.char_end);
      EXPECT_EQ(m.matched_lemmas, *res().index().lemma_sequence(m.term_id));
    }
  }
}

TEST(FindMatches, AgreesWithBruteForceOnFixtureSentences) {
  for (const auto& [text, lang] : std::vector<std::pair<std::string, Language>>{
           {"the Third World and third worlds, race and races", Language::en},
           {"ein Mischlingskind aus der Dritten Welt", Language::de},
           {"een allochtoon in de Derde Wereld", Language::nl},
           {"il sordo e i sordi", Language::it}}) {
    const auto doc = preprocess(text, lang, res().text());
    EXPECT_EQ(oracle::keys(find_matches(doc, res().automaton(lang))),
              oracle::brute_force_matches(doc, res().index().patterns(lang)))
        << text;
  }
}
