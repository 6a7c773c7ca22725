#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cdstar/extended_real.hpp"

namespace cdstar {

struct QuadratureOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-300;
  int max_depth = 48;
  int min_depth = 3;  // forced bisections before the error test applies
  // Partial sums toward a singular point beyond this count as divergent.
  double divergence_cap = 1e12;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
};

namespace detail {

template <class F>
double simpson_step(F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth, int min_depth, QuadratureResult& acc) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  acc.evaluations += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || (min_depth <= 0 && std::abs(delta) <= 15.0 * tol) || lm <= a || rm >= b) {
    acc.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, min_depth - 1, acc) +
         simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, min_depth - 1, acc);
}

}  // namespace detail

// Adaptive Simpson with Richardson correction on a closed interval where f is
// finite at every sampled point.
template <class F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  QuadratureResult acc;
  if (a == b) return acc;
  const double sign = a < b ? 1.0 : -1.0;
  if (a > b) std::swap(a, b);
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(m);
  acc.evaluations = 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = std::max(opts.abs_tol, opts.rel_tol * std::abs(whole));
  acc.value = sign * detail::simpson_step(f, a, fa, b, fb, m, fm, whole, tol, opts.max_depth, opts.min_depth, acc);
  return acc;
}

// Integral of f over the half-open interval between `regular` and `singular`,
// where f may blow up at `singular`. The interval is cut into dyadic shells
// shrinking toward the singular end; the result is infinity when the partial
// sums pass opts.divergence_cap or the shell integrals stop decaying.
template <class F>
ExtendedReal integrate_toward_singular(F&& f, double regular, double singular,
                                       const QuadratureOptions& opts = {}) {
  const double length = std::abs(singular - regular);
  if (length == 0.0) return ExtendedReal(0.0);
  const double dir = singular > regular ? 1.0 : -1.0;
  double total = 0.0;
  double prev_shell = -1.0;
  std::vector<double> ratios;
  double outer = regular;
  for (int k = 1; k < 4000; ++k) {
    const double inner = singular - dir * std::ldexp(length, -k);
    if (inner == outer || dir * (inner - singular) >= 0.0) break;
    const double shell = std::abs(adaptive_simpson(f, outer, inner, opts).value);
    if (!std::isfinite(shell)) return ExtendedReal::infinity();
    total += shell;
    if (total > opts.divergence_cap) return ExtendedReal::infinity();
    if (prev_shell > 0.0) ratios.push_back(shell / prev_shell);
    prev_shell = shell;
    outer = inner;
    if (ratios.size() >= 8) {
      double mean = 0.0;
      for (std::size_t i = ratios.size() - 8; i < ratios.size(); ++i) mean += ratios[i];
      mean /= 8.0;
      if (mean >= 1.0) return ExtendedReal::infinity();
      if (shell <= opts.rel_tol * total * (1.0 - mean)) {
        return ExtendedReal(total + shell * mean / (1.0 - mean));
      }
    }
  }
  // Floating point resolution reached before a decision.
  if (ratios.size() >= 4) {
    double mean = 0.0;
    for (std::size_t i = ratios.size() - 4; i < ratios.size(); ++i) mean += ratios[i];
    mean /= 4.0;
    if (mean >= 1.0 - 1e-3) return ExtendedReal::infinity();
    return ExtendedReal(total + prev_shell * mean / (1.0 - mean));
  }
  return ExtendedReal(total);
}

}  // namespace cdstar
