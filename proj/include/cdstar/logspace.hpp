#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cdstar {

// log(e^a + e^b), with -inf standing for zero.
inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double log_sum_exp(const std::vector<double>& terms) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double t : terms) hi = std::max(hi, t);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - hi);
  return hi + std::log(s);
}

// log(c) for c >= 0.
inline double safe_log(double c) { return c > 0.0 ? std::log(c) : -std::numeric_limits<double>::infinity(); }

}  // namespace cdstar
