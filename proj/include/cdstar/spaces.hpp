#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdstar/extended_real.hpp"
#include "cdstar/quadrature.hpp"

namespace cdstar {

enum class WeightKind { kSinh, kPower, kCos, kPiecewiseConstant };

std::string_view to_string(WeightKind kind);
WeightKind weight_kind_from_string(std::string_view name);

// Closed catalog of reference densities w(x) with respect to Lebesgue measure.
//   kSinh:  |sinh(x sqrt(-K/N))|^N
//   kPower: |x|^N
//   kCos:   cos(x sqrt(K/N))^N on |x| <= (pi/2) sqrt(N/K)
//   kPiecewiseConstant: values[i] on [breaks[i], breaks[i+1])
class Weight {
 public:
  static Weight sinh_profile(double K, double N);
  static Weight power_profile(double N);
  static Weight cos_profile(double K, double N);
  static Weight piecewise_constant(std::vector<double> breaks, std::vector<double> values);

  WeightKind kind() const { return kind_; }
  double K() const { return K_; }
  double N() const { return N_; }
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }

  // +inf at singular points.
  double operator()(double x) const;

  // Exact integral over [c,d] for piecewise-constant weights.
  double piecewise_integral(double c, double d) const;

  bool operator==(const Weight&) const = default;

 private:
  Weight() = default;
  WeightKind kind_ = WeightKind::kPiecewiseConstant;
  double K_ = 0.0;
  double N_ = 0.0;
  double rate_ = 0.0;        // sqrt(|K/N|)
  double half_width_ = 0.0;  // cos profile only
  std::vector<double> breaks_;
  std::vector<double> values_;
};

// One-dimensional metric measure space (I, |x-y|, w(x) dx) on an interval I
// whose endpoints may be infinite. The singular set is declared by the
// constructor and checked: every listed point must carry infinite mass in
// each of its neighbourhoods.
class WeightedInterval {
 public:
  WeightedInterval(std::string name, double lo, double hi, Weight weight,
                   std::vector<double> singular_set, std::string claimed_condition = {},
                   QuadratureOptions quadrature = {});

  const std::string& name() const { return name_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const Weight& weight() const { return weight_; }
  const std::vector<double>& singular_set() const { return singular_set_; }
  const std::string& claimed_condition() const { return claimed_condition_; }
  const QuadratureOptions& quadrature() const { return quadrature_; }

  double weight_at(double x) const { return weight_(x); }
  bool contains(double x) const { return x >= lo_ && x <= hi_; }
  bool is_singular(double x) const;
  // Singular points p with c < p < d.
  std::vector<double> singular_points_inside(double c, double d) const;

  // m([c,d]) for lo <= c <= d <= hi, both finite. Infinity when [c,d]
  // touches a singular point.
  ExtendedReal reference_mass(double c, double d) const;
  // Signed integral of w from c to d over a stretch known to avoid the
  // singular set. No domain checks; used by the quantile solvers.
  double regular_mass(double c, double d) const;

  bool operator==(const WeightedInterval& other) const;

 private:
  void validate() const;

  std::string name_;
  double lo_;
  double hi_;
  Weight weight_;
  std::vector<double> singular_set_;
  std::string claimed_condition_;
  QuadratureOptions quadrature_;
};

using SpacePtr = std::shared_ptr<const WeightedInterval>;

// The three model spaces:
//   "sinh_model"  (R, |sinh(x sqrt(-K/N))|^N dx), K > 0, N < -1, singular {0}
//   "power_model" (R, |x|^N dx),                    K = 0, N < -1, singular {0}
//   "cos_model"   ([-h,h], cos(x sqrt(K/N))^N dx),  K < 0, N < -1, singular {-h,h},
//                 h = (pi/2) sqrt(N/K)
// Each records the claimed condition "CD(K, N+1)".
WeightedInterval model_space(std::string_view name, double K, double N);
SpacePtr make_model_space(std::string_view name, double K, double N);
const std::vector<std::string>& model_space_names();

// Flat interval [lo,hi] with w = 1.
SpacePtr make_flat_space(double lo, double hi);

// Finite metric space used as a discrete test bed. Singular atoms carry
// infinite reference mass and may not be charged by admissible measures.
class FiniteMetricSpace {
 public:
  FiniteMetricSpace(std::vector<std::string> labels, std::vector<double> dist,
                    std::vector<ExtendedReal> weights);

  // Points on the real line with the induced distance; coordinates retained.
  static FiniteMetricSpace on_line(std::vector<double> coords, std::vector<ExtendedReal> weights);
  static FiniteMetricSpace on_line(std::vector<double> coords);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  double distance(std::size_t i, std::size_t j) const { return dist_[i * size() + j]; }
  const ExtendedReal& weight(std::size_t i) const { return weights_[i]; }
  bool is_singular(std::size_t i) const { return weights_[i].is_infinite(); }
  const std::optional<std::vector<double>>& coords() const { return coords_; }
  const std::vector<double>& distance_matrix() const { return dist_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<ExtendedReal>& weights() const { return weights_; }

  bool operator==(const FiniteMetricSpace&) const = default;

 private:
  std::vector<std::string> labels_;
  std::vector<double> dist_;
  std::vector<ExtendedReal> weights_;
  std::optional<std::vector<double>> coords_;
};

using FiniteSpacePtr = std::shared_ptr<const FiniteMetricSpace>;

}  // namespace cdstar
