#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace exprag::text {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

inline std::optional<std::string_view> after_prefix(std::string_view s, std::string_view prefix) {
  if (!s.starts_with(prefix)) return std::nullopt;
  return s.substr(prefix.size());
}

// Splits at the first occurrence of `sep`; both halves must be non-empty.
inline std::optional<std::pair<std::string_view, std::string_view>> split_once(std::string_view s,
                                                                              std::string_view sep) {
  const auto pos = s.find(sep);
  if (pos == std::string_view::npos || pos == 0 || pos + sep.size() >= s.size()) return std::nullopt;
  return std::pair{s.substr(0, pos), s.substr(pos + sep.size())};
}

}  // namespace exprag::text
