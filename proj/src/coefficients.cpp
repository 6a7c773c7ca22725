#include "cdstar/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cdstar/errors.hpp"

namespace cdstar {
namespace {

void validate(const DistortionParams& p) {
  if (!std::isfinite(p.K)) throw DomainError("sigma: K must be finite");
  if (!(p.N < 0.0) || !std::isfinite(p.N)) {
    throw DomainError("sigma: N must be negative, got " + std::to_string(p.N));
  }
  if (!(p.t >= 0.0 && p.t <= 1.0)) {
    throw DomainError("sigma: t must lie in [0,1], got " + std::to_string(p.t));
  }
  if (!(p.theta >= 0.0) || !std::isfinite(p.theta)) {
    throw DomainError("sigma: theta must be nonnegative, got " + std::to_string(p.theta));
  }
}

// sinh(t a) / sinh(a) for a > 0.
double sinh_ratio(double t, double a) {
  if (a < kSigmaSeriesThreshold) return t * (1.0 - (1.0 - t * t) * a * a / 6.0);
  if (t == 1.0) return 1.0;
  if (a > 20.0) {
    // exp form avoids overflow of sinh for large arguments
    return std::exp((t - 1.0) * a) * (-std::expm1(-2.0 * t * a)) / (-std::expm1(-2.0 * a));
  }
  return std::sinh(t * a) / std::sinh(a);
}

// sin(t a) / sin(a) for 0 < a < pi.
double sin_ratio(double t, double a) {
  if (a < kSigmaSeriesThreshold) return t * (1.0 + (1.0 - t * t) * a * a / 6.0);
  if (t == 1.0) return 1.0;
  return std::sin(t * a) / std::sin(a);
}

double finite_sigma(double K, double N, double t, double theta, const char* what) {
  const ExtendedReal v = sigma(K, N, t, theta);
  if (v.is_infinite()) {
    throw DomainError(std::string(what) + ": coefficient in the infinite branch");
  }
  return v.value();
}

// Maps a time ratio that should lie in [0,1] onto it, absorbing rounding.
double unit_ratio(double r, const char* what) {
  constexpr double kSlack = 1e-13;
  if (r < -kSlack || r > 1.0 + kSlack) {
    throw DomainError(std::string(what) + ": time ratio " + std::to_string(r) + " outside [0,1]");
  }
  return std::clamp(r, 0.0, 1.0);
}

struct DyadicThetas {
  double fine;    // theta^k
  double coarse;  // theta^{k-1}
};

DyadicThetas dyadic_thetas(int k, double theta0, const char* what) {
  if (k < 1) throw DomainError(std::string(what) + ": k must be >= 1");
  if (!(theta0 >= 0.0)) throw DomainError(std::string(what) + ": theta0 must be >= 0");
  return {std::ldexp(theta0, -k), std::ldexp(theta0, -(k - 1))};
}

}  // namespace

ExtendedReal sigma(const DistortionParams& p) {
  validate(p);
  const double kt2 = p.K * p.theta * p.theta;
  const double boundary = p.N * std::numbers::pi * std::numbers::pi;
  if (kt2 - boundary <= kSigmaBoundaryTolerance) return ExtendedReal::infinity();
  if (kt2 == 0.0) return ExtendedReal(p.t);
  if (kt2 < 0.0) return ExtendedReal(sin_ratio(p.t, p.theta * std::sqrt(p.K / p.N)));
  return ExtendedReal(sinh_ratio(p.t, p.theta * std::sqrt(-p.K / p.N)));
}

IdentitySides sigma_half_doubling(double K, double N, double theta) {
  const double half = finite_sigma(K, N, 0.5, theta, "sigma_half_doubling");
  const double denom = 1.0 - 2.0 * half * half;
  if (denom <= kSigmaBoundaryTolerance) {
    throw DomainError("sigma_half_doubling: 1 - 2 sigma^2 is not positive");
  }
  const double rhs = finite_sigma(K, N, 0.5, 2.0 * theta, "sigma_half_doubling");
  return {half * half / denom, rhs};
}

IdentitySides coef_identity_one(double K, double N, int k, double theta0, double x, double s) {
  const auto th = dyadic_thetas(k, theta0, "coef_identity_one");
  const double fine_time = unit_ratio(std::ldexp(x - s, k), "coef_identity_one");
  const double coarse_time = unit_ratio(std::ldexp(x - s, k - 1), "coef_identity_one");
  const double lhs = finite_sigma(K, N, fine_time, th.fine, "coef_identity_one") *
                     finite_sigma(K, N, 0.5, th.coarse, "coef_identity_one");
  const double rhs = finite_sigma(K, N, coarse_time, th.coarse, "coef_identity_one");
  return {lhs, rhs};
}

IdentitySides coef_identity_two(double K, double N, int k, double theta0, double x, double s) {
  const auto th = dyadic_thetas(k, theta0, "coef_identity_two");
  const double elapsed = unit_ratio(std::ldexp(x - s, k), "coef_identity_two");
  const double remaining = unit_ratio(std::ldexp(s + std::ldexp(1.0, -k) - x, k), "coef_identity_two");
  const double coarse_remaining =
      unit_ratio(std::ldexp(s + std::ldexp(1.0, -(k - 1)) - x, k - 1), "coef_identity_two");
  const double lhs = finite_sigma(K, N, remaining, th.fine, "coef_identity_two") +
                     finite_sigma(K, N, elapsed, th.fine, "coef_identity_two") *
                         finite_sigma(K, N, 0.5, th.coarse, "coef_identity_two");
  const double rhs = finite_sigma(K, N, coarse_remaining, th.coarse, "coef_identity_two");
  return {lhs, rhs};
}

}  // namespace cdstar
