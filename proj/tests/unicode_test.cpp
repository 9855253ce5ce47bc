#include <gtest/gtest.h>

#include "debias/unicode.hpp"

namespace u = debias::unicode;

TEST(Unicode, DecodeEncodeRoundTrip) {
  const std::string text = "indigène — sì, Köln";
  EXPECT_EQ(u::encode(u::decode(text)), text);
  EXPECT_EQ(u::count_code_points(text), 19u);
}

TEST(Unicode, InvalidBytesBecomeReplacementCharacters) {
  const std::string bad = "a\xff" "b";
  EXPECT_FALSE(u::is_valid_utf8(bad));
  const auto cps = u::decode(bad);
  ASSERT_EQ(cps.size(), 3u);
  EXPECT_EQ(cps[1], U'�');
  EXPECT_FALSE(u::is_valid_utf8("\xc3"));
  EXPECT_FALSE(u::is_valid_utf8("\xed\xa0\x80"));  // surrogate
  EXPECT_TRUE(u::is_valid_utf8(""));
}

TEST(Unicode, CharacterClasses) {
  EXPECT_TRUE(u::is_letter(U'è'));
  EXPECT_TRUE(u::is_uppercase(U'Ö'));
  EXPECT_FALSE(u::is_uppercase(U'ö'));
  EXPECT_TRUE(u::is_digit(U'7'));
  EXPECT_TRUE(u::is_punctuation(U'…'));
  EXPECT_TRUE(u::is_apostrophe(U'’'));
  EXPECT_TRUE(u::is_hyphen(U'-'));
  EXPECT_TRUE(u::is_space(U' '));
}

TEST(Unicode, LowercaseAndDiacritics) {
  EXPECT_EQ(u::to_lower("ÉCOLE Dritte"), "école dritte");
  EXPECT_EQ(u::strip_diacritics("sì"), "si");
  EXPECT_EQ(u::strip_diacritics("indigène"), "indigene");
}
