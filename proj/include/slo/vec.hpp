#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace slo {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

inline bool all_nonnegative(std::span<const double> a) {
  for (double v : a)
    if (v < 0.0) return false;
  return true;
}

inline bool is_zero(std::span<const double> a) {
  for (double v : a)
    if (v != 0.0) return false;
  return true;
}

}  // namespace slo
