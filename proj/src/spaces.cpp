#include "cdstar/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "cdstar/errors.hpp"

namespace cdstar {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

std::string_view to_string(WeightKind kind) {
  switch (kind) {
    case WeightKind::kSinh: return "sinh";
    case WeightKind::kPower: return "power";
    case WeightKind::kCos: return "cos";
    case WeightKind::kPiecewiseConstant: return "piecewise_constant";
  }
  return "unknown";
}

WeightKind weight_kind_from_string(std::string_view name) {
  if (name == "sinh") return WeightKind::kSinh;
  if (name == "power") return WeightKind::kPower;
  if (name == "cos") return WeightKind::kCos;
  if (name == "piecewise_constant") return WeightKind::kPiecewiseConstant;
  throw std::invalid_argument("unknown weight kind '" + std::string(name) + "'");
}

Weight Weight::sinh_profile(double K, double N) {
  require(K > 0.0 && N < 0.0, "sinh weight requires K > 0 and N < 0");
  Weight w;
  w.kind_ = WeightKind::kSinh;
  w.K_ = K;
  w.N_ = N;
  w.rate_ = std::sqrt(-K / N);
  return w;
}

Weight Weight::power_profile(double N) {
  require(N < 0.0, "power weight requires N < 0");
  Weight w;
  w.kind_ = WeightKind::kPower;
  w.N_ = N;
  return w;
}

Weight Weight::cos_profile(double K, double N) {
  require(K < 0.0 && N < 0.0, "cos weight requires K < 0 and N < 0");
  Weight w;
  w.kind_ = WeightKind::kCos;
  w.K_ = K;
  w.N_ = N;
  w.rate_ = std::sqrt(K / N);
  w.half_width_ = 0.5 * std::numbers::pi / w.rate_;
  return w;
}

Weight Weight::piecewise_constant(std::vector<double> breaks, std::vector<double> values) {
  require(breaks.size() >= 2 && values.size() + 1 == breaks.size(),
          "piecewise-constant weight needs n+1 breaks for n values");
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    require(std::isfinite(breaks[i]) && breaks[i] < breaks[i + 1], "weight breaks must increase");
    require(std::isfinite(values[i]) && values[i] > 0.0, "weight values must be positive");
  }
  require(std::isfinite(breaks.back()), "weight breaks must be finite");
  Weight w;
  w.kind_ = WeightKind::kPiecewiseConstant;
  w.breaks_ = std::move(breaks);
  w.values_ = std::move(values);
  return w;
}

double Weight::operator()(double x) const {
  switch (kind_) {
    case WeightKind::kSinh: return std::pow(std::abs(std::sinh(rate_ * x)), N_);
    case WeightKind::kPower: return std::pow(std::abs(x), N_);
    case WeightKind::kCos: {
      const double gap = half_width_ - std::abs(x);
      if (gap < 0.0) return std::numeric_limits<double>::quiet_NaN();
      // cos(b x) = sin(b (h - |x|)) keeps full relative precision near the ends
      return std::pow(std::sin(rate_ * gap), N_);
    }
    case WeightKind::kPiecewiseConstant: {
      if (x < breaks_.front() || x > breaks_.back()) return std::numeric_limits<double>::quiet_NaN();
      auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
      std::size_t i = static_cast<std::size_t>(it - breaks_.begin());
      i = std::clamp<std::size_t>(i, 1, values_.size()) - 1;
      return values_[i];
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double Weight::piecewise_integral(double c, double d) const {
  double total = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double a = std::max(c, breaks_[i]);
    const double b = std::min(d, breaks_[i + 1]);
    if (b > a) total += values_[i] * (b - a);
  }
  return total;
}

WeightedInterval::WeightedInterval(std::string name, double lo, double hi, Weight weight,
                                   std::vector<double> singular_set, std::string claimed_condition,
                                   QuadratureOptions quadrature)
    : name_(std::move(name)),
      lo_(lo),
      hi_(hi),
      weight_(std::move(weight)),
      singular_set_(std::move(singular_set)),
      claimed_condition_(std::move(claimed_condition)),
      quadrature_(quadrature) {
  std::sort(singular_set_.begin(), singular_set_.end());
  singular_set_.erase(std::unique(singular_set_.begin(), singular_set_.end()), singular_set_.end());
  validate();
}

void WeightedInterval::validate() const {
  require(lo_ < hi_, "space '" + name_ + "': domain must be a nondegenerate interval");
  require(!std::isnan(lo_) && !std::isnan(hi_), "space '" + name_ + "': NaN domain bound");
  if (weight_.kind() == WeightKind::kPiecewiseConstant) {
    require(std::isfinite(lo_) && std::isfinite(hi_) && weight_.breaks().front() <= lo_ &&
                weight_.breaks().back() >= hi_,
            "space '" + name_ + "': piecewise-constant weight must cover the domain");
  }
  for (double p : singular_set_) {
    require(std::isfinite(p) && p >= lo_ && p <= hi_,
            "space '" + name_ + "': singular point outside the domain");
  }

  // Positivity and finiteness of w away from the singular set.
  const double a = std::isfinite(lo_) ? lo_ : -8.0;
  const double b = std::isfinite(hi_) ? hi_ : 8.0;
  constexpr int kSamples = 257;
  for (int i = 0; i < kSamples; ++i) {
    const double x = a + (b - a) * (i + 0.5) / kSamples;
    if (is_singular(x)) continue;
    const double wx = weight_(x);
    require(std::isfinite(wx) && wx > 0.0,
            "space '" + name_ + "': weight not positive and finite at x=" + std::to_string(x));
  }

  // Each declared singular point must have a neighbourhood of infinite mass.
  for (std::size_t i = 0; i < singular_set_.size(); ++i) {
    const double p = singular_set_[i];
    double reach = 0.5;
    if (i > 0) reach = std::min(reach, 0.5 * (p - singular_set_[i - 1]));
    if (i + 1 < singular_set_.size()) reach = std::min(reach, 0.5 * (singular_set_[i + 1] - p));
    bool diverges = false;
    if (p > lo_) {
      const double r = std::min(reach, 0.5 * (p - lo_));
      diverges |= integrate_toward_singular(weight_, p - r, p, quadrature_).is_infinite();
    }
    if (!diverges && p < hi_) {
      const double r = std::min(reach, 0.5 * (hi_ - p));
      diverges |= integrate_toward_singular(weight_, p + r, p, quadrature_).is_infinite();
    }
    require(diverges, "space '" + name_ + "': declared singular point " + std::to_string(p) +
                          " has a neighbourhood of finite mass");
  }
}

bool WeightedInterval::is_singular(double x) const {
  return std::binary_search(singular_set_.begin(), singular_set_.end(), x);
}

std::vector<double> WeightedInterval::singular_points_inside(double c, double d) const {
  std::vector<double> out;
  for (double p : singular_set_) {
    if (p > c && p < d) out.push_back(p);
  }
  return out;
}

ExtendedReal WeightedInterval::reference_mass(double c, double d) const {
  if (!(std::isfinite(c) && std::isfinite(d)) || c > d || c < lo_ || d > hi_) {
    throw DomainError("reference_mass: [" + std::to_string(c) + ", " + std::to_string(d) +
                      "] is not a finite subinterval of the domain of '" + name_ + "'");
  }
  if (c == d) return ExtendedReal(0.0);
  if (weight_.kind() == WeightKind::kPiecewiseConstant) {
    return ExtendedReal(weight_.piecewise_integral(c, d));
  }
  std::vector<double> cuts{c};
  for (double p : singular_points_inside(c, d)) cuts.push_back(p);
  cuts.push_back(d);

  ExtendedReal total(0.0);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double p = cuts[i];
    const double q = cuts[i + 1];
    const bool ps = is_singular(p);
    const bool qs = is_singular(q);
    if (!ps && !qs) {
      total += ExtendedReal(adaptive_simpson(weight_, p, q, quadrature_).value);
      continue;
    }
    const double mid = 0.5 * (p + q);
    const ExtendedReal left = ps ? integrate_toward_singular(weight_, mid, p, quadrature_)
                                 : ExtendedReal(adaptive_simpson(weight_, p, mid, quadrature_).value);
    if (left.is_infinite()) return ExtendedReal::infinity();
    const ExtendedReal right = qs ? integrate_toward_singular(weight_, mid, q, quadrature_)
                                  : ExtendedReal(adaptive_simpson(weight_, mid, q, quadrature_).value);
    if (right.is_infinite()) return ExtendedReal::infinity();
    total += left + right;
  }
  return total;
}

double WeightedInterval::regular_mass(double c, double d) const {
  if (c == d) return 0.0;
  if (weight_.kind() == WeightKind::kPiecewiseConstant) {
    return c < d ? weight_.piecewise_integral(c, d) : -weight_.piecewise_integral(d, c);
  }
  return adaptive_simpson(weight_, c, d, quadrature_).value;
}

bool WeightedInterval::operator==(const WeightedInterval& other) const {
  return name_ == other.name_ && lo_ == other.lo_ && hi_ == other.hi_ && weight_ == other.weight_ &&
         singular_set_ == other.singular_set_ && claimed_condition_ == other.claimed_condition_;
}

WeightedInterval model_space(std::string_view name, double K, double N) {
  char claim[64];
  std::snprintf(claim, sizeof claim, "CD(%g, %g)", K, N + 1.0);
  if (name == "sinh_model") {
    require(K > 0.0 && N < -1.0, "sinh_model requires K > 0 and N < -1");
    return WeightedInterval("sinh_model", -kInf, kInf, Weight::sinh_profile(K, N), {0.0}, claim);
  }
  if (name == "power_model") {
    require(K == 0.0 && N < -1.0, "power_model requires K = 0 and N < -1");
    return WeightedInterval("power_model", -kInf, kInf, Weight::power_profile(N), {0.0}, claim);
  }
  if (name == "cos_model") {
    require(K < 0.0 && N < -1.0, "cos_model requires K < 0 and N < -1");
    const double h = 0.5 * std::numbers::pi * std::sqrt(N / K);
    return WeightedInterval("cos_model", -h, h, Weight::cos_profile(K, N), {-h, h}, claim);
  }
  throw std::invalid_argument("unknown model space '" + std::string(name) + "'");
}

SpacePtr make_model_space(std::string_view name, double K, double N) {
  return std::make_shared<const WeightedInterval>(model_space(name, K, N));
}

const std::vector<std::string>& model_space_names() {
  static const std::vector<std::string> names{"sinh_model", "power_model", "cos_model"};
  return names;
}

SpacePtr make_flat_space(double lo, double hi) {
  return std::make_shared<const WeightedInterval>("flat", lo, hi, Weight::piecewise_constant({lo, hi}, {1.0}),
                                                  std::vector<double>{});
}

FiniteMetricSpace::FiniteMetricSpace(std::vector<std::string> labels, std::vector<double> dist,
                                     std::vector<ExtendedReal> weights)
    : labels_(std::move(labels)), dist_(std::move(dist)), weights_(std::move(weights)) {
  const std::size_t n = labels_.size();
  require(n > 0, "finite metric space must have at least one point");
  require(dist_.size() == n * n, "distance matrix must be n x n");
  require(weights_.size() == n, "one reference weight per point required");
  double scale = 0.0;
  for (double d : dist_) {
    require(std::isfinite(d) && d >= 0.0, "distances must be finite and nonnegative");
    scale = std::max(scale, d);
  }
  const double tol = 1e-12 * std::max(1.0, scale);
  for (std::size_t i = 0; i < n; ++i) {
    require(distance(i, i) == 0.0, "distance matrix must have zero diagonal");
    require(weights_[i].is_infinite() || weights_[i].value() > 0.0, "reference weights must be positive");
    for (std::size_t j = 0; j < n; ++j) {
      require(std::abs(distance(i, j) - distance(j, i)) <= tol, "distance matrix must be symmetric");
      for (std::size_t k = 0; k < n; ++k) {
        require(distance(i, k) <= distance(i, j) + distance(j, k) + tol,
                "distance matrix violates the triangle inequality");
      }
    }
  }
}

FiniteMetricSpace FiniteMetricSpace::on_line(std::vector<double> coords, std::vector<ExtendedReal> weights) {
  const std::size_t n = coords.size();
  std::vector<std::string> labels(n);
  std::vector<double> dist(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    require(std::isfinite(coords[i]), "line coordinates must be finite");
    labels[i] = "x" + std::to_string(i);
    for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = std::abs(coords[i] - coords[j]);
  }
  FiniteMetricSpace space(std::move(labels), std::move(dist), std::move(weights));
  space.coords_ = std::move(coords);
  return space;
}

FiniteMetricSpace FiniteMetricSpace::on_line(std::vector<double> coords) {
  std::vector<ExtendedReal> weights(coords.size(), ExtendedReal(1.0));
  return on_line(std::move(coords), std::move(weights));
}

}  // namespace cdstar
