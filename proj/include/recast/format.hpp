#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace recast {

/// Shortest decimal string that round-trips to the same double; NaN prints
/// as an empty field.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace recast
