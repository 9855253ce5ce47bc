#pragma once

// UTF-8 helpers. Offsets exposed to users of the library are counted in
// Unicode scalar values ("characters"); byte offsets stay internal.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace debias::unicode {

/// Decodes one scalar value starting at `pos` and advances `pos`.
/// Invalid sequences decode as U+FFFD and consume a single byte.
char32_t next_code_point(std::string_view text, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);

std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);

bool is_valid_utf8(std::string_view text);
std::size_t count_code_points(std::string_view text);

bool is_letter(char32_t cp);
bool is_digit(char32_t cp);
bool is_mark(char32_t cp);
bool is_space(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_uppercase(char32_t cp);
bool is_apostrophe(char32_t cp);
bool is_hyphen(char32_t cp);

char32_t to_lower(char32_t cp);
std::string to_lower(std::string_view text);

/// Canonical decomposition with combining marks removed ("sì" -> "si").
std::string strip_diacritics(std::string_view text);

}  // namespace debias::unicode
