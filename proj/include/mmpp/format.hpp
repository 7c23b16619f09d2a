#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace mmpp {

// Shortest round-trip-safe decimal for doubles (17 significant digits by
// default); "nan" / "inf" spelled out.
inline std::string format_real(double x, int digits = 17) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

}  // namespace mmpp
