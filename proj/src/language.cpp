#include "debias/language.hpp"

namespace debias {

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::en: return "en";
    case Language::de: return "de";
    case Language::nl: return "nl";
    case Language::fr: return "fr";
    case Language::it: return "it";
  }
  return "??";
}

std::optional<Language> parse_language(std::string_view code) {
  for (Language lang : kAllLanguages) {
    if (to_string(lang) == code) return lang;
  }
  return std::nullopt;
}

}  // namespace debias
