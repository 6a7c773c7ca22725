#pragma once

#include "cdstar/extended_real.hpp"

namespace cdstar {

// Arguments of the distortion coefficient sigma_{K,N}^{(t)}(theta), N < 0.
struct DistortionParams {
  double K = 0.0;
  double N = -1.0;
  double t = 0.0;
  double theta = 0.0;
};

// |K theta^2 - N pi^2| below this is treated as the boundary, which maps to
// the infinite branch.
inline constexpr double kSigmaBoundaryTolerance = 1e-12;
// theta sqrt(|K/N|) below this switches to the second-order series.
inline constexpr double kSigmaSeriesThreshold = 1e-6;

// Four-branch distortion coefficient for negative dimension:
//   inf                                   if K theta^2 <= N pi^2
//   sin(t a) / sin(a),  a = theta sqrt(K/N)   if N pi^2 < K theta^2 < 0
//   t                                     if K theta^2 = 0
//   sinh(t a) / sinh(a), a = theta sqrt(-K/N) if K theta^2 > 0
// Throws DomainError for N >= 0, t outside [0,1] or theta < 0.
ExtendedReal sigma(const DistortionParams& p);

// Convenience overload.
inline ExtendedReal sigma(double K, double N, double t, double theta) {
  return sigma(DistortionParams{K, N, t, theta});
}

struct IdentitySides {
  double lhs = 0.0;
  double rhs = 0.0;
};

// Midpoint doubling identity
//   sigma^{(1/2)}(theta)^2 / (1 - 2 sigma^{(1/2)}(theta)^2) = sigma^{(1/2)}(2 theta).
// Throws DomainError when either side is infinite or the denominator is
// not positive.
IdentitySides sigma_half_doubling(double K, double N, double theta);

// Product identity used when halving the dyadic scale. With
// theta^k = theta0 / 2^k and s <= x <= s + 2^{-k}:
//   lhs = sigma^{((x-s) 2^k)}(theta^k) * sigma^{(1/2)}(theta^{k-1})
//   rhs = sigma^{((x-s) 2^{k-1})}(theta^{k-1})
// Requires k >= 1 and every coefficient in a finite branch.
IdentitySides coef_identity_one(double K, double N, int k, double theta0, double x, double s);

// Sum identity companion of coef_identity_one:
//   lhs = sigma^{((s+2^{-k}-x) 2^k)}(theta^k)
//         + sigma^{((x-s) 2^k)}(theta^k) * sigma^{(1/2)}(theta^{k-1})
//   rhs = sigma^{((s+2^{-(k-1)}-x) 2^{k-1})}(theta^{k-1})
IdentitySides coef_identity_two(double K, double N, int k, double theta0, double x, double s);

}  // namespace cdstar
