#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace debias {

/// Languages covered by the vocabulary.
enum class Language { en, de, nl, fr, it };

inline constexpr std::array<Language, 5> kAllLanguages = {
    Language::en, Language::de, Language::nl, Language::fr, Language::it};

std::string_view to_string(Language lang);
std::optional<Language> parse_language(std::string_view code);

/// German and Dutch freely form compounds; only those get compound splitting.
constexpr bool is_compounding(Language lang) {
  return lang == Language::de || lang == Language::nl;
}

/// French and Italian elide articles and prepositions with an apostrophe.
constexpr bool has_apostrophe_clitics(Language lang) {
  return lang == Language::fr || lang == Language::it;
}

}  // namespace debias
