#include "cdstar/quantile_geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "cdstar/errors.hpp"
#include "cdstar/logspace.hpp"
#include "cdstar/quadrature.hpp"

namespace cdstar {
namespace {

constexpr double kLevelMergeTolerance = 1e-13;

// Charged cell of mu whose CDF range contains u.
std::size_t cell_for_level(const GridMeasure& mu, double u) {
  const auto& cdf = mu.cdf();
  const std::size_t n = mu.cell_count();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t i = it == cdf.begin() ? 0 : static_cast<std::size_t>(it - cdf.begin()) - 1;
  i = std::min(i, n - 1);
  if (mu.probability(i) > 0.0) return i;
  for (std::size_t j = i + 1; j < n; ++j) {
    if (mu.probability(j) > 0.0) return j;
  }
  for (std::size_t j = i; j-- > 0;) {
    if (mu.probability(j) > 0.0) return j;
  }
  throw DomainError("measure has no charged cell");
}

// Inverts u -> x inside one charged cell, reusing the last solution when
// levels are requested in increasing order.
class CellInverter {
 public:
  explicit CellInverter(const GridMeasure& mu) : mu_(mu) {}

  double solve(std::size_t cell, double u) {
    const double lo = mu_.cell_lo(cell);
    const double hi = mu_.cell_hi(cell);
    const double c_lo = mu_.cdf()[cell];
    const double c_hi = mu_.cdf()[cell + 1];
    const double fraction = std::clamp((u - c_lo) / (c_hi - c_lo), 0.0, 1.0);
    if (fraction == 0.0) return lo;
    if (fraction == 1.0) return hi;
    const double cell_mass = mu_.cell_mass(cell).value();
    const double target = fraction * cell_mass;
    if (cell != cell_ || target < m_cur_) {
      cell_ = cell;
      x_cur_ = lo;
      m_cur_ = 0.0;
    }
    const WeightedInterval& space = *mu_.space();
    double a = x_cur_;
    double b = hi;
    for (int iter = 0; iter < 200; ++iter) {
      const double f = m_cur_ - target;
      if (std::abs(f) <= 1e-15 * cell_mass) break;
      if (f < 0.0) a = std::max(a, x_cur_);
      else b = std::min(b, x_cur_);
      const double w = space.weight_at(x_cur_);
      double x_new = x_cur_ - f / w;
      if (!(x_new > a && x_new < b) || !std::isfinite(x_new)) x_new = 0.5 * (a + b);
      if (x_new == x_cur_) break;
      m_cur_ += space.regular_mass(x_cur_, x_new);
      x_cur_ = x_new;
      if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b))) break;
    }
    return x_cur_;
  }

 private:
  const GridMeasure& mu_;
  std::size_t cell_ = static_cast<std::size_t>(-1);
  double x_cur_ = 0.0;
  double m_cur_ = 0.0;
};

std::vector<double> merged_levels(const GridMeasure& mu0, const GridMeasure& mu1, const std::vector<double>& extra) {
  std::vector<double> all;
  all.insert(all.end(), mu0.cdf().begin(), mu0.cdf().end());
  all.insert(all.end(), mu1.cdf().begin(), mu1.cdf().end());
  for (double u : extra) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile level outside [0,1]");
    all.push_back(u);
  }
  std::sort(all.begin(), all.end());
  std::vector<double> levels{0.0};
  for (double u : all) {
    if (u - levels.back() > kLevelMergeTolerance && u < 1.0 - kLevelMergeTolerance) levels.push_back(u);
  }
  levels.push_back(1.0);
  return levels;
}

// dx/du of the quantile function of mu inside a charged cell.
double slope(const GridMeasure& mu, std::size_t cell, double x) {
  return 1.0 / (mu.density()[cell] * mu.space()->weight_at(x));
}

struct Interpolant {
  std::vector<double> breaks;
  std::vector<double> probabilities;
  std::vector<std::size_t> segment_cell;
};

Interpolant interpolant_cells(const QuantileGeodesic& g, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolation time outside [0,1]");
  Interpolant out;
  const auto& segs = g.segments();
  out.breaks.push_back(segs.front().at_lo(t));
  for (const QuantileSegment& seg : segs) {
    const double lo = seg.at_lo(t);
    const double hi = seg.at_hi(t);
    if (lo > out.breaks.back()) {
      out.breaks.push_back(lo);
      out.probabilities.push_back(0.0);
    }
    if (!(hi > out.breaks.back())) {
      throw DomainError("degenerate interpolation cell at t=" + std::to_string(t));
    }
    out.breaks.push_back(hi);
    out.probabilities.push_back(seg.mass());
    out.segment_cell.push_back(out.probabilities.size() - 1);
  }
  const double total = std::accumulate(out.probabilities.begin(), out.probabilities.end(), 0.0);
  for (double& p : out.probabilities) p /= total;
  return out;
}

}  // namespace

QuantileGeodesic::QuantileGeodesic(GridMeasure mu0, GridMeasure mu1, std::size_t subdivisions,
                                   std::vector<double> extra_u)
    : mu0_(std::move(mu0)), mu1_(std::move(mu1)), subdivisions_(subdivisions), extra_u_(std::move(extra_u)) {
  if (!(*mu0_.space() == *mu1_.space())) throw DomainError("transport between measures on different spaces");
  if (subdivisions_ == 0) throw DomainError("subdivisions must be positive");
  std::sort(extra_u_.begin(), extra_u_.end());
  extra_u_.erase(std::unique(extra_u_.begin(), extra_u_.end()), extra_u_.end());
  build(extra_u_);
}

QuantileGeodesic::QuantileGeodesic(Assembled, GridMeasure mu0, GridMeasure mu1, std::size_t subdivisions,
                                   std::vector<QuantileSegment> segments)
    : mu0_(std::move(mu0)), mu1_(std::move(mu1)), subdivisions_(subdivisions), segments_(std::move(segments)) {}

void QuantileGeodesic::build(const std::vector<double>& extra_u) {
  const std::vector<double> levels = merged_levels(mu0_, mu1_, extra_u);
  CellInverter inv0(mu0_);
  CellInverter inv1(mu1_);
  const std::size_t S = subdivisions_;
  segments_.clear();
  segments_.reserve((levels.size() - 1) * S);
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const double U0 = levels[k];
    const double U1 = levels[k + 1];
    const double centre = 0.5 * (U0 + U1);
    const std::size_t c0 = cell_for_level(mu0_, centre);
    const std::size_t c1 = cell_for_level(mu1_, centre);
    auto level = [&](std::size_t j) {
      if (j == 0) return U0;
      if (j == 2 * S) return U1;
      return U0 + (U1 - U0) * static_cast<double>(j) / static_cast<double>(2 * S);
    };
    std::vector<double> x0(2 * S + 1), x1(2 * S + 1);
    for (std::size_t j = 0; j <= 2 * S; ++j) {
      x0[j] = inv0.solve(c0, level(j));
      x1[j] = inv1.solve(c1, level(j));
    }
    for (std::size_t j = 0; j < S; ++j) {
      QuantileSegment seg;
      seg.u_lo = level(2 * j);
      seg.u_hi = level(2 * j + 2);
      seg.x0_lo = x0[2 * j];
      seg.x0_mid = x0[2 * j + 1];
      seg.x0_hi = x0[2 * j + 2];
      seg.x1_lo = x1[2 * j];
      seg.x1_mid = x1[2 * j + 1];
      seg.x1_hi = x1[2 * j + 2];
      seg.cell0 = c0;
      seg.cell1 = c1;
      seg.d0_lo = slope(mu0_, c0, seg.x0_lo);
      seg.d0_mid = slope(mu0_, c0, seg.x0_mid);
      seg.d0_hi = slope(mu0_, c0, seg.x0_hi);
      seg.d1_lo = slope(mu1_, c1, seg.x1_lo);
      seg.d1_mid = slope(mu1_, c1, seg.x1_mid);
      seg.d1_hi = slope(mu1_, c1, seg.x1_hi);
      seg.bx0_lo = seg.x0_lo;
      seg.bx0_mid = seg.x0_mid;
      seg.bx0_hi = seg.x0_hi;
      seg.bx1_lo = seg.x1_lo;
      seg.bx1_mid = seg.x1_mid;
      seg.bx1_hi = seg.x1_hi;
      seg.rho0 = mu0_.density()[c0];
      seg.rho1 = mu1_.density()[c1];
      segments_.push_back(seg);
    }
  }
}

double QuantileGeodesic::cost() const {
  // f = (X1 - X0)^2 with end slopes f' = 2 (X1 - X0)(X1' - X0'):
  // int f = h (7 f_lo + 16 f_mid + 7 f_hi) / 30 + h^2 (f'_lo - f'_hi) / 60, exact to degree 5.
  double total = 0.0;
  for (const QuantileSegment& s : segments_) {
    const double h = s.mass();
    const double dl = s.x1_lo - s.x0_lo;
    const double dm = s.x1_mid - s.x0_mid;
    const double dh = s.x1_hi - s.x0_hi;
    const double gl = 2.0 * dl * (s.d1_lo - s.d0_lo);
    const double gh = 2.0 * dh * (s.d1_hi - s.d0_hi);
    if (std::isfinite(gl) && std::isfinite(gh)) {
      total += h * (7.0 * dl * dl + 16.0 * dm * dm + 7.0 * dh * dh) / 30.0 + h * h * (gl - gh) / 60.0;
    } else {
      total += h / 6.0 * (dl * dl + 4.0 * dm * dm + dh * dh);
    }
  }
  return total;
}

std::size_t QuantileGeodesic::segment_index(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile level outside [0,1]");
  auto it = std::upper_bound(segments_.begin(), segments_.end(), u,
                             [](double v, const QuantileSegment& s) { return v < s.u_lo; });
  std::size_t i = it == segments_.begin() ? 0 : static_cast<std::size_t>(it - segments_.begin()) - 1;
  return std::min(i, segments_.size() - 1);
}

double QuantileGeodesic::quantile0(double u) const {
  const QuantileSegment& s = segments_[segment_index(u)];
  if (u <= s.u_lo) return s.x0_lo;
  if (u >= s.u_hi) return s.x0_hi;
  CellInverter inv(mu0_);
  return inv.solve(s.cell0, u);
}

double QuantileGeodesic::quantile1(double u) const {
  const QuantileSegment& s = segments_[segment_index(u)];
  if (u <= s.u_lo) return s.x1_lo;
  if (u >= s.u_hi) return s.x1_hi;
  CellInverter inv(mu1_);
  return inv.solve(s.cell1, u);
}

double QuantileGeodesic::position(double u, double t) const {
  return (1.0 - t) * quantile0(u) + t * quantile1(u);
}

QuantileGeodesic QuantileGeodesic::refined_at(const std::vector<double>& u) const {
  std::vector<double> extra = extra_u_;
  extra.insert(extra.end(), u.begin(), u.end());
  return QuantileGeodesic(mu0_, mu1_, subdivisions_, std::move(extra));
}

QuantileGeodesic QuantileGeodesic::with_subdivisions(std::size_t subdivisions) const {
  return QuantileGeodesic(mu0_, mu1_, subdivisions, extra_u_);
}

QuantileGeodesic QuantileGeodesic::restrict_u(double u_a, double u_b) const {
  if (!(u_a < u_b)) throw DomainError("restrict_u needs u_a < u_b");
  constexpr double tol = 1e-12;
  std::vector<QuantileSegment> picked;
  for (const QuantileSegment& s : segments_) {
    if (s.u_lo >= u_a - tol && s.u_hi <= u_b + tol) picked.push_back(s);
  }
  if (picked.empty() || std::abs(picked.front().u_lo - u_a) > tol || std::abs(picked.back().u_hi - u_b) > tol) {
    throw DomainError("restrict_u levels must be segment boundaries");
  }
  const double width = picked.back().u_hi - picked.front().u_lo;
  const double base = picked.front().u_lo;
  GridMeasure m0 = restrict_and_renormalize(mu0_, picked.front().x0_lo, picked.back().x0_hi);
  GridMeasure m1 = restrict_and_renormalize(mu1_, picked.front().x1_lo, picked.back().x1_hi);
  auto locate = [](const GridMeasure& mu, double x) {
    auto it = std::upper_bound(mu.breaks().begin(), mu.breaks().end(), x);
    std::size_t i = it == mu.breaks().begin() ? 0 : static_cast<std::size_t>(it - mu.breaks().begin()) - 1;
    return std::min(i, mu.cell_count() - 1);
  };
  for (QuantileSegment& s : picked) {
    s.u_lo = (s.u_lo - base) / width;
    s.u_hi = (s.u_hi - base) / width;
    for (double* d : {&s.d0_lo, &s.d0_mid, &s.d0_hi, &s.d1_lo, &s.d1_mid, &s.d1_hi}) *d *= width;
    s.u_scale *= width;
    s.cell0 = locate(m0, s.x0_mid);
    s.cell1 = locate(m1, s.x1_mid);
  }
  picked.front().u_lo = 0.0;
  picked.back().u_hi = 1.0;
  return QuantileGeodesic(Assembled{}, std::move(m0), std::move(m1), subdivisions_, std::move(picked));
}

QuantileGeodesic QuantileGeodesic::restrict_time(double r, double s) const {
  if (!(r >= 0.0 && s <= 1.0 && r < s)) throw DomainError("restrict_time needs 0 <= r < s <= 1");
  const Interpolant a = interpolant_cells(*this, r);
  const Interpolant b = interpolant_cells(*this, s);
  GridMeasure m0 = GridMeasure::from_cell_masses(space(), a.breaks, a.probabilities);
  GridMeasure m1 = GridMeasure::from_cell_masses(space(), b.breaks, b.probabilities);
  std::vector<QuantileSegment> segs = segments_;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const QuantileSegment& old = segments_[k];
    QuantileSegment& n = segs[k];
    n.x0_lo = old.at_lo(r);
    n.x0_mid = old.at_mid(r);
    n.x0_hi = old.at_hi(r);
    n.x1_lo = old.at_lo(s);
    n.x1_mid = old.at_mid(s);
    n.x1_hi = old.at_hi(s);
    n.d0_lo = (1.0 - r) * old.d0_lo + r * old.d1_lo;
    n.d0_mid = (1.0 - r) * old.d0_mid + r * old.d1_mid;
    n.d0_hi = (1.0 - r) * old.d0_hi + r * old.d1_hi;
    n.d1_lo = (1.0 - s) * old.d0_lo + s * old.d1_lo;
    n.d1_mid = (1.0 - s) * old.d0_mid + s * old.d1_mid;
    n.d1_hi = (1.0 - s) * old.d0_hi + s * old.d1_hi;
    n.time_lo = old.time_lo + r * (old.time_hi - old.time_lo);
    n.time_hi = old.time_lo + s * (old.time_hi - old.time_lo);
    n.cell0 = a.segment_cell[k];
    n.cell1 = b.segment_cell[k];
  }
  return QuantileGeodesic(Assembled{}, std::move(m0), std::move(m1), subdivisions_, std::move(segs));
}

namespace {

struct InfiniteSample {};

struct Hermite {
  double u0, h, y0, m0, y1, m1;
  double value(double u) const {
    const double t = (u - u0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
  }
};

}  // namespace

double QuantileGeodesic::log_integrate(const std::function<double(const QuantilePoint&)>& log_f,
                                       double rel_tol) const {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr int kScaleSamples = 8;
  QuadratureOptions opts;
  opts.rel_tol = rel_tol;
  opts.max_depth = 20;
  opts.min_depth = 1;
  const WeightedInterval& sp = *space();
  std::vector<double> logs;
  logs.reserve(2 * segments_.size());

  for (const QuantileSegment& s : segments_) {
    const double ta = s.time_lo, tb = s.time_hi;
    auto point = [&](double b0, double b1) {
      const double d0 = s.u_scale / (s.rho0 * sp.weight_at(b0));
      const double d1 = s.u_scale / (s.rho1 * sp.weight_at(b1));
      return QuantilePoint{(1.0 - ta) * b0 + ta * b1, (1.0 - ta) * d0 + ta * d1, (1.0 - tb) * b0 + tb * b1,
                           (1.0 - tb) * d0 + tb * d1};
    };
    auto piece = [&](double a, double b, double b0a, double b0b, double b1a, double b1b, const QuantilePoint& pa,
                     const QuantilePoint& pb) {
      const Hermite h0{a, b - a, b0a, s.u_scale / (s.rho0 * sp.weight_at(b0a)), b0b,
                       s.u_scale / (s.rho0 * sp.weight_at(b0b))};
      const Hermite h1{a, b - a, b1a, s.u_scale / (s.rho1 * sp.weight_at(b1a)), b1b,
                       s.u_scale / (s.rho1 * sp.weight_at(b1b))};
      auto at = [&](double u) { return u == a ? pa : u == b ? pb : point(h0.value(u), h1.value(u)); };
      // The integrand can vary by hundreds of e-folds across a piece; scale
      // by its largest sampled value.
      double scale = -kInf;
      for (int j = 0; j <= kScaleSamples; ++j) {
        const double v = log_f(at(a + (b - a) * j / kScaleSamples));
        if (v == kInf) throw InfiniteSample{};
        scale = std::max(scale, v);
      }
      if (scale == -kInf) return -kInf;
      auto f = [&](double u) {
        const double v = log_f(at(u));
        if (v == kInf) throw InfiniteSample{};
        return std::exp(v - scale);
      };
      return scale + std::log(adaptive_simpson(f, a, b, opts).value);
    };
    const double um = 0.5 * (s.u_lo + s.u_hi);
    const QuantilePoint lo{s.x0_lo, s.d0_lo, s.x1_lo, s.d1_lo};
    const QuantilePoint mid{s.x0_mid, s.d0_mid, s.x1_mid, s.d1_mid};
    const QuantilePoint hi{s.x0_hi, s.d0_hi, s.x1_hi, s.d1_hi};
    try {
      logs.push_back(piece(s.u_lo, um, s.bx0_lo, s.bx0_mid, s.bx1_lo, s.bx1_mid, lo, mid));
      logs.push_back(piece(um, s.u_hi, s.bx0_mid, s.bx0_hi, s.bx1_mid, s.bx1_hi, mid, hi));
    } catch (const InfiniteSample&) {
      return kInf;
    }
  }
  return log_sum_exp(logs);
}

double QuantileGeodesic::log_entropy(double t, double Nprime) const {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolation time outside [0,1]");
  if (!(Nprime < 0.0)) throw DomainError("entropy exponent requires N' < 0");
  const WeightedInterval& sp = *space();
  for (const QuantileSegment& s : segments_) {
    const double a = s.at_lo(t), b = s.at_hi(t);
    if (sp.is_singular(a) || sp.is_singular(b) || !sp.singular_points_inside(a, b).empty()) {
      throw NotFiniteError("interpolant at t=" + std::to_string(t) + " charges the singular set");
    }
  }
  const double p = 1.0 / Nprime;
  return log_integrate([&](const QuantilePoint& q) {
    const double x = (1.0 - t) * q.x0 + t * q.x1;
    const double d = (1.0 - t) * q.d0 + t * q.d1;
    return p * std::log(d * sp.weight_at(x));
  });
}

double QuantileGeodesic::min_pair_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (const QuantileSegment& s : segments_) {
    best = std::min({best, std::abs(s.x1_lo - s.x0_lo), std::abs(s.x1_mid - s.x0_mid), std::abs(s.x1_hi - s.x0_hi)});
  }
  return best;
}

double QuantileGeodesic::max_pair_distance() const {
  double best = 0.0;
  for (const QuantileSegment& s : segments_) {
    best = std::max({best, std::abs(s.x1_lo - s.x0_lo), std::abs(s.x1_mid - s.x0_mid), std::abs(s.x1_hi - s.x0_hi)});
  }
  return best;
}

QuantileTransport w2_quantile(const GridMeasure& mu0, const GridMeasure& mu1, std::size_t subdivisions) {
  QuantileGeodesic g(mu0, mu1, subdivisions);
  // Quantiles are exact at any level, so integrate them directly instead of
  // relying on the node rule in cost(). Fixed Gauss-Legendre per segment;
  // nodes go in increasing order so the inverters only walk forward.
  using Rule = boost::math::quadrature::gauss<double, 10>;
  std::vector<std::pair<double, double>> rule;  // (node in [-1,1], weight)
  for (std::size_t i = 0; i < Rule::abscissa().size(); ++i) {
    rule.emplace_back(Rule::abscissa()[i], Rule::weights()[i]);
    rule.emplace_back(-Rule::abscissa()[i], Rule::weights()[i]);
  }
  std::sort(rule.begin(), rule.end());
  CellInverter inv0(mu0);
  CellInverter inv1(mu1);
  double cost = 0.0;
  for (const QuantileSegment& s : g.segments()) {
    const double half = 0.5 * (s.u_hi - s.u_lo);
    const double mid = 0.5 * (s.u_hi + s.u_lo);
    double sum = 0.0;
    for (const auto& [x, w] : rule) {
      const double u = mid + half * x;
      const double d = inv1.solve(s.cell1, u) - inv0.solve(s.cell0, u);
      sum += w * d * d;
    }
    cost += half * sum;
  }
  return QuantileTransport{cost, std::move(g)};
}

GridMeasure displacement_interpolate(const QuantileGeodesic& g, double t) {
  Interpolant cells = interpolant_cells(g, t);
  return GridMeasure::from_cell_masses(g.space(), std::move(cells.breaks), std::move(cells.probabilities));
}

double w2_quantile_discrete(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  const auto& c0 = mu0.space()->coords();
  const auto& c1 = mu1.space()->coords();
  if (!c0 || !c1) throw DomainError("discrete quantile transport needs line coordinates");
  auto sorted_atoms = [](const std::vector<double>& coords, const DiscreteMeasure& mu) {
    std::vector<std::pair<double, double>> atoms;
    for (std::size_t i : mu.support()) atoms.emplace_back(coords[i], mu.mass(i));
    std::sort(atoms.begin(), atoms.end());
    return atoms;
  };
  const auto a = sorted_atoms(*c0, mu0);
  const auto b = sorted_atoms(*c1, mu1);
  std::size_t i = 0, j = 0;
  double ra = a.empty() ? 0.0 : a[0].second;
  double rb = b.empty() ? 0.0 : b[0].second;
  double total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(ra, rb);
    const double d = a[i].first - b[j].first;
    total += m * d * d;
    ra -= m;
    rb -= m;
    if (ra <= rb) {
      if (++i < a.size()) ra = a[i].second;
    } else {
      if (++j < b.size()) rb = b[j].second;
    }
  }
  return total;
}

}  // namespace cdstar
