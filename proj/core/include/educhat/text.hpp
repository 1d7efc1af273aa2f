#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace educhat::text {

/// Number of UTF-8 code points. Invalid lead bytes count as one code point each.
std::size_t utf8_length(std::string_view s);

/// Longest prefix of `s` holding at most `max_chars` code points, cut on a code point boundary.
std::string_view utf8_prefix(std::string_view s, std::size_t max_chars);

std::string_view trim(std::string_view s);
std::string ascii_lower(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);
bool starts_with_ci(std::string_view s, std::string_view prefix);

std::vector<std::string_view> split_lines(std::string_view s);

/// Replaces every `{key}` with its value. Unknown placeholders are left untouched.
std::string render(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

}  // namespace educhat::text
