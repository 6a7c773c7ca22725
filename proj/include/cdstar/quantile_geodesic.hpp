#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "cdstar/measures.hpp"

namespace cdstar {

// One piece of the shared u-grid. Inside a segment both quantile functions
// stay in a single charged cell (cell0 of mu0, cell1 of mu1), so they are
// smooth there; jumps across zero-density gaps happen only between segments.
struct QuantileSegment {
  double u_lo = 0.0;
  double u_hi = 0.0;
  double x0_lo = 0.0, x0_mid = 0.0, x0_hi = 0.0;
  double x1_lo = 0.0, x1_mid = 0.0, x1_hi = 0.0;
  // dx/du of the two quantile functions at the same nodes.
  double d0_lo = 0.0, d0_mid = 0.0, d0_hi = 0.0;
  double d1_lo = 0.0, d1_mid = 0.0, d1_hi = 0.0;
  // The geodesic this segment was cut from: its quantiles bx0, bx1 at the
  // nodes, their cell densities, the time window [time_lo, time_hi] this
  // segment's endpoints sit at, and du_base/du. Slopes anywhere follow
  // exactly from positions, dbx/du = u_scale / (rho w(bx)).
  double bx0_lo = 0.0, bx0_mid = 0.0, bx0_hi = 0.0;
  double bx1_lo = 0.0, bx1_mid = 0.0, bx1_hi = 0.0;
  double rho0 = 0.0, rho1 = 0.0;
  double time_lo = 0.0, time_hi = 1.0;
  double u_scale = 1.0;
  std::size_t cell0 = 0;
  std::size_t cell1 = 0;

  double mass() const { return u_hi - u_lo; }
  double at_lo(double t) const { return (1.0 - t) * x0_lo + t * x1_lo; }
  double at_mid(double t) const { return (1.0 - t) * x0_mid + t * x1_mid; }
  double at_hi(double t) const { return (1.0 - t) * x0_hi + t * x1_hi; }
};

// Both quantile functions and their u-derivatives at one level.
struct QuantilePoint {
  double x0 = 0.0, d0 = 0.0;
  double x1 = 0.0, d1 = 0.0;
};

// Monotone (quantile) geodesic between two grid measures on the same
// weighted interval. The u-grid is the union of both CDFs at their
// breakpoints (plus optional extra levels), each interval cut into
// `subdivisions` equal parts.
class QuantileGeodesic {
 public:
  QuantileGeodesic(GridMeasure mu0, GridMeasure mu1, std::size_t subdivisions = 2,
                   std::vector<double> extra_u = {});

  const GridMeasure& mu0() const { return mu0_; }
  const GridMeasure& mu1() const { return mu1_; }
  const SpacePtr& space() const { return mu0_.space(); }
  const std::vector<QuantileSegment>& segments() const { return segments_; }
  std::size_t subdivisions() const { return subdivisions_; }
  const std::vector<double>& extra_u() const { return extra_u_; }

  // W2^2 = int_0^1 (F1^{-1} - F0^{-1})^2 du from the stored nodes and slopes
  // (quintic Hermite rule per segment).
  double cost() const;

  // Right-continuous quantile functions and the geodesic position
  // (1-t) F0^{-1}(u) + t F1^{-1}(u).
  double quantile0(double u) const;
  double quantile1(double u) const;
  double position(double u, double t) const;

  // Same endpoints on a grid that also contains the levels `u`.
  QuantileGeodesic refined_at(const std::vector<double>& u) const;
  // Rebuilt with a different number of subdivisions.
  QuantileGeodesic with_subdivisions(std::size_t subdivisions) const;

  // Sub-geodesic carried by the quantile levels [u_a, u_b], renormalized.
  // Both levels must be segment boundaries.
  QuantileGeodesic restrict_u(double u_a, double u_b) const;

  // Affine reparametrization onto [r, s]: the curve tau -> mu_{r + tau (s-r)}.
  // The endpoints become the grid interpolants at r and s.
  QuantileGeodesic restrict_time(double r, double s) const;

  // log of int_0^1 exp(log_f(Q(u))) du. Inside each half segment the base
  // quantile functions are cubic Hermite interpolants of node values and
  // exact slopes, and slopes at interior points are recomputed exactly from
  // the interpolated positions; adaptive Simpson on each piece, scaled so
  // that huge integrands stay representable.
  double log_integrate(const std::function<double(const QuantilePoint&)>& log_f, double rel_tol = 1e-10) const;

  // log S_{N'}(mu_t) of the exact interpolant: in quantile coordinates
  // rho_t(X_t(u))^{-1/N'} = (X_t'(u) w(X_t(u)))^{1/N'}, via log_integrate.
  // Throws NotFiniteError when a segment's image meets the singular set.
  double log_entropy(double t, double Nprime) const;

  // Extremes of |x1 - x0| over the coupled pairs at the segment nodes.
  double min_pair_distance() const;
  double max_pair_distance() const;

 private:
  struct Assembled {};
  QuantileGeodesic(Assembled, GridMeasure mu0, GridMeasure mu1, std::size_t subdivisions,
                   std::vector<QuantileSegment> segments);
  void build(const std::vector<double>& extra_u);
  std::size_t segment_index(double u) const;

  GridMeasure mu0_;
  GridMeasure mu1_;
  std::size_t subdivisions_ = 2;
  std::vector<double> extra_u_;
  std::vector<QuantileSegment> segments_;
};

struct QuantileTransport {
  double cost = 0.0;  // W2^2
  QuantileGeodesic geodesic;
};

// Optimal transport on the line between two grid measures. The cost is
// integrated on the exact quantiles (10-point Gauss per segment).
QuantileTransport w2_quantile(const GridMeasure& mu0, const GridMeasure& mu1, std::size_t subdivisions = 2);

// mu_t = (e_t)_# pi as a grid measure: one cell per segment, zero-density
// cells across gaps. Throws NotFiniteError if a charged cell lands on the
// singular set.
GridMeasure displacement_interpolate(const QuantileGeodesic& g, double t);

// W2^2 between discrete measures whose spaces carry line coordinates, by
// merging the two CDFs.
double w2_quantile_discrete(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);

}  // namespace cdstar
