#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace chaineval::text {

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);
std::string_view rtrim_view(std::string_view s);

/// ASCII case fold. Non-ASCII bytes pass through untouched.
std::string to_lower(std::string_view s);

bool is_blank(std::string_view s);

/// Lower-cases, turns every ASCII punctuation/whitespace run into one space
/// and trims. Idempotent.
std::string normalize_phrase(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

/// Offset of `needle` in `haystack` where both neighbours are non-alphanumeric
/// (or the string edge), starting the search at `from`; npos when absent.
std::size_t find_whole_word(std::string_view haystack, std::string_view needle, std::size_t from = 0);

std::size_t edit_distance(std::string_view a, std::string_view b);

/// Decimal-style half-to-even rounding to `digits` places. Values whose
/// scaled fractional part lies within 1e-9 of one half are treated as ties,
/// so 54.285 rounds to 54.28 even though its binary form is slightly off.
double round_half_even(double value, int digits);

/// Fixed two-decimal rendering of round_half_even(value, 2).
std::string format_2dp(double value);

}  // namespace chaineval::text
