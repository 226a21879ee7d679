#pragma once

// Small helpers shared by the line-oriented text formats.

#include "fixedlens/errors.hpp"

#include <charconv>
#include <string>
#include <string_view>

namespace fixedlens::text {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Strips a trailing `#` comment and surrounding whitespace.
inline std::string_view strip_comment(std::string_view s) {
  const auto hash = s.find('#');
  return trim(hash == std::string_view::npos ? s : s.substr(0, hash));
}

inline double to_double(std::string_view s, const std::string& what) {
  const std::string str(trim(s));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(str, &used);
  } catch (const std::exception&) {
    throw ValidationError(what + ": '" + str + "' is not a number");
  }
  if (used != str.size()) throw ValidationError(what + ": '" + str + "' is not a number");
  return v;
}

inline int to_int(std::string_view s, const std::string& what) {
  const std::string_view str = trim(s);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(str.data(), str.data() + str.size(), v);
  if (ec != std::errc() || ptr != str.data() + str.size()) {
    throw ValidationError(what + ": '" + std::string(str) + "' is not an integer");
  }
  return v;
}

inline bool to_bool(std::string_view s, const std::string& what) {
  const std::string_view str = trim(s);
  if (str == "true" || str == "1" || str == "yes") return true;
  if (str == "false" || str == "0" || str == "no") return false;
  throw ValidationError(what + ": '" + std::string(str) + "' is not a boolean");
}

}  // namespace fixedlens::text
