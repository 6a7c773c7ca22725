#include "cdstar/selftest.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cdstar/cdcheck.hpp"
#include "cdstar/coefficients.hpp"
#include "cdstar/localglobal.hpp"
#include "cdstar/measures.hpp"
#include "cdstar/sampling.hpp"
#include "cdstar/transport.hpp"

namespace cdstar {
namespace {

// Tracks the largest deviation and keeps the first failure message.
class Check {
 public:
  Check(std::string name, double tolerance) {
    out_.name = std::move(name);
    out_.tolerance = tolerance;
  }

  void record(double deviation, const std::string& where) {
    ++out_.cases;
    if (!(deviation <= out_.worst)) out_.worst = deviation;
    if (!(deviation <= out_.tolerance) && out_.passed) {
      out_.passed = false;
      out_.detail = where;
    }
  }
  void require(bool ok, const std::string& where) { record(ok ? 0.0 : 1.0, where); }

  SelftestCheck done() { return std::move(out_); }

 private:
  SelftestCheck out_;
};

std::string describe(std::initializer_list<std::pair<const char*, double>> values) {
  std::ostringstream s;
  bool first = true;
  for (const auto& [k, v] : values) {
    s << (first ? "" : " ") << k << '=' << io::format_double(v);
    first = false;
  }
  return s.str();
}

struct SigmaSample {
  double K, N, theta;
};

// K in [-3, 3] (a fifth of the draws exactly 0), N in [-4, -0.5], theta in a finite branch.
SigmaSample sigma_sample(Rng& rng) {
  const double N = rng.uniform(-4.0, -0.5);
  const double K = rng.bernoulli(0.2) ? 0.0 : rng.uniform(-3.0, 3.0);
  const double cap = K < 0.0 ? 0.95 * std::numbers::pi * std::sqrt(N / K) : 5.0;
  return {K, N, rng.uniform(0.0, cap)};
}

SelftestCheck sigma_boundaries(Rng& rng) {
  Check c("sigma.boundary_values", 0.0);
  for (int i = 0; i < 2000; ++i) {
    const SigmaSample p = sigma_sample(rng);
    const double lo = sigma(p.K, p.N, 0.0, p.theta).value();
    const double hi = sigma(p.K, p.N, 1.0, p.theta).value();
    c.record(std::max(std::abs(lo), std::abs(hi - 1.0)), describe({{"K", p.K}, {"N", p.N}, {"theta", p.theta}}));
  }
  return c.done();
}

SelftestCheck sigma_monotone(Rng& rng) {
  Check c("sigma.monotone_in_theta", 1e-12);
  for (int i = 0; i < 2000; ++i) {
    SigmaSample p = sigma_sample(rng);
    SigmaSample q = sigma_sample(rng);
    q.K = p.K;
    q.N = p.N;
    const double cap = p.K < 0.0 ? 0.95 * std::numbers::pi * std::sqrt(p.N / p.K) : 5.0;
    q.theta = rng.uniform(0.0, cap);
    const double t = rng.uniform();
    const double a = std::min(p.theta, q.theta), b = std::max(p.theta, q.theta);
    const double sa = sigma(p.K, p.N, t, a).value(), sb = sigma(p.K, p.N, t, b).value();
    // increasing for K <= 0, decreasing for K >= 0
    double violation = 0.0;
    if (p.K <= 0.0) violation = std::max(violation, sa - sb);
    if (p.K >= 0.0) violation = std::max(violation, sb - sa);
    c.record(violation / std::max(1.0, std::abs(sb)), describe({{"K", p.K}, {"N", p.N}, {"t", t}, {"theta1", a}, {"theta2", b}}));
  }
  return c.done();
}

SelftestCheck sigma_identities(Rng& rng) {
  Check c("sigma.identities", 1e-12);
  for (int i = 0; i < 1000; ++i) {
    const double K = rng.uniform(0.1, 3.0), N = rng.uniform(-4.0, -0.5);
    const double theta0 = rng.uniform(0.0, 4.0);
    const int k = 1 + static_cast<int>(rng.below(6));
    const double step = std::ldexp(1.0, -k);
    const double s = static_cast<double>(rng.below(std::size_t{1} << k)) * step;
    const double x = s + rng.uniform() * step;
    const IdentitySides d = sigma_half_doubling(K, N, theta0);
    const IdentitySides one = coef_identity_one(K, N, k, theta0, x, s);
    const IdentitySides two = coef_identity_two(K, N, k, theta0, x, s);
    const double dev = std::max({std::abs(d.lhs - d.rhs), std::abs(one.lhs - one.rhs), std::abs(two.lhs - two.rhs)});
    c.record(dev, describe({{"K", K}, {"N", N}, {"k", k}, {"theta0", theta0}, {"x", x}, {"s", s}}));
  }
  return c.done();
}

SelftestCheck transport_oracle(Rng& rng) {
  Check c("transport.quantile_vs_lp", 1e-6);
  const SpacePtr space = make_model_space("cos_model", -1.0, -2.0);
  const auto [lo, hi] = regular_window(*space, 0.25);
  GridSampleOptions opts;
  opts.max_cells = 12;
  for (int i = 0; i < 20; ++i) {
    const DiscreteMeasure a = atomize(random_grid_measure(space, lo, hi, rng, opts));
    const DiscreteMeasure b = atomize(random_grid_measure(space, lo, hi, rng, opts));
    const double q = w2_quantile_discrete(a, b);
    const LpTransport lp = w2_lp_oracle(a, b);
    c.record(std::abs(q - lp.cost) / (1.0 + lp.cost), "pair " + std::to_string(i));
  }
  return c.done();
}

SelftestCheck transport_enumeration(Rng& rng) {
  Check c("transport.lp_vs_enumeration", 0.0);
  for (std::size_t n = 1; n <= 8; ++n) {
    for (int rep = 0; rep < 3; ++rep) {
      std::vector<double> xs(n), ys(n);
      for (auto& x : xs) x = static_cast<double>(rng.below(41)) - 20.0;
      for (auto& y : ys) y = static_cast<double>(rng.below(41)) - 20.0;
      // distinct coordinates
      for (std::size_t i = 0; i < n; ++i) xs[i] += 64.0 * static_cast<double>(i);
      for (std::size_t i = 0; i < n; ++i) ys[i] += 64.0 * static_cast<double>(n - 1 - i);
      const auto sa = std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::on_line(xs));
      const auto sb = std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::on_line(ys));
      const LpTransport lp = w2_lp_oracle(equal_mass_measure(sa), equal_mass_measure(sb));
      // The LP vertex is a permutation; its integer cost must equal the enumerated minimum.
      std::vector<double> cost(n * n);
      double chosen = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          cost[i * n + j] = (xs[i] - ys[j]) * (xs[i] - ys[j]);
          if (lp.coupling.at(i, j) > 0.5 / static_cast<double>(n)) chosen += cost[i * n + j];
        }
      }
      c.record(std::abs(chosen - permutation_minimum(cost, n)), "n=" + std::to_string(n));
    }
  }
  return c.done();
}

SelftestCheck entropy_laws(Rng& rng) {
  Check c("entropy.laws", 1e-8);
  const SpacePtr space = make_model_space("sinh_model", 1.0, -2.0);
  const double lo = 0.5, hi = 3.0;
  for (int i = 0; i < 30; ++i) {
    const double Nprime = -std::exp(rng.uniform(std::log(1e-2), std::log(4.0)));
    const double a = rng.uniform(lo, 0.5 * (lo + hi)), b = rng.uniform(0.5 * (lo + hi), hi);
    const GridMeasure u = GridMeasure::uniform(space, a, b, 1 + rng.below(4));
    const double expected = std::pow(space->reference_mass(a, b).value(), 1.0 / Nprime);
    c.record(std::abs(renyi_entropy(u, Nprime) / expected - 1.0), describe({{"a", a}, {"b", b}, {"Nprime", Nprime}}));

    const GridMeasure mu = random_grid_measure(space, lo, hi, rng);
    const JensenBound jb = jensen_lower_bound(mu, Nprime);
    c.record(std::max(0.0, 1.0 - jb.entropy / jb.bound), "jensen " + std::to_string(i));

    const double mid = rng.uniform(1.2, 2.2);
    const double alpha = rng.uniform(0.1, 0.9);
    MixtureComponents<GridMeasure> parts{{alpha, random_grid_measure(space, lo, mid, rng)},
                                         {1.0 - alpha, random_grid_measure(space, mid, hi, rng)}};
    const MixtureEntropy me = entropy_of_mixture(parts, Nprime);
    c.record(std::abs(me.direct - me.weighted_sum) / std::max(1.0, std::abs(me.direct)), "mixture " + std::to_string(i));
  }
  return c.done();
}

SelftestCheck geodesic_speed(Rng& rng) {
  Check c("geodesic.constant_speed", 1e-4);
  const SpacePtr space = make_model_space("power_model", 0.0, -2.0);
  for (int i = 0; i < 10; ++i) {
    const GridMeasure a = random_grid_measure(space, 0.5, 3.0, rng);
    const GridMeasure b = random_grid_measure(space, 0.5, 3.0, rng);
    // mu_s, mu_t are piecewise-constant images of the geodesic; the gap to
    // (t - s) W2 shrinks like the square of the segment width.
    const QuantileTransport qt = w2_quantile(a, b, 64);
    const double w = std::sqrt(qt.cost);
    double s = rng.uniform(), t = rng.uniform();
    if (s > t) std::swap(s, t);
    const double ws = std::sqrt(w2_quantile(displacement_interpolate(qt.geodesic, s),
                                            displacement_interpolate(qt.geodesic, t), 4).cost);
    c.record(std::abs(ws - (t - s) * w) / std::max(w, 1e-300), describe({{"s", s}, {"t", t}}));
  }
  return c.done();
}

SelftestCheck model_check(Rng& rng, const char* name, double K, std::pair<double, double> window) {
  Check c(std::string("cdcheck.") + name, 0.0);
  const SpacePtr space = make_model_space(name, K, -2.0);
  for (int i = 0; i < 2; ++i) {
    const GridMeasure a = random_grid_measure(space, window.first, window.second, rng);
    const GridMeasure b = random_grid_measure(space, window.first, window.second, rng);
    const CdVerdict v = cd_star_check(a, b, K, -1.0);
    const bool ok = v.verdict == Verdict::kPass && !(v.note_ratio > 0.5);
    c.record(ok ? 0.0 : 1.0, "pair " + std::to_string(i) + " " + std::string(to_string(v.verdict)) +
                                 " ratio=" + io::format_double(v.note_ratio));
  }
  return c.done();
}

SelftestCheck kappa_examples() {
  Check c("localglobal.choose_kappa", 0.0);
  c.require(choose_kappa(1.0, 4.0) == 0, "R=1 lambda=4");
  c.require(choose_kappa(1.0, 1.0) == 2, "R=1 lambda=1");
  c.require(choose_kappa(3.0, 0.5) == 5, "R=3 lambda=0.5");
  return c.done();
}

SelftestCheck io_roundtrip(Rng& rng) {
  Check c("io.roundtrip", 0.0);
  for (const std::string& name : model_space_names()) {
    const double K = name == "cos_model" ? -1.0 : name == "power_model" ? 0.0 : 1.0;
    const SpacePtr space = make_model_space(name, K, -2.0);
    const WeightedInterval back = io::space_from_json(io::parse_json(io::dump(io::space_to_json(*space))));
    c.require(back == *space, name);
    const auto [lo, hi] = regular_window(*space, 0.25);
    const GridMeasure mu = random_grid_measure(space, lo, hi, rng);
    const GridMeasure mu_back =
        io::grid_measure_from_json(io::parse_json(io::dump(io::measure_to_json(mu, io::space_ref_of(*space)))), space);
    c.require(mu_back == mu, name + " measure");
  }
  return c.done();
}

}  // namespace

SelftestReport run_selftest(std::uint64_t seed) {
  SelftestReport report;
  report.seed = seed;
  // One stream per check, so adding a check leaves the others unchanged.
  auto stream = [&](std::uint64_t index) { return Rng(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1))); };
  Rng r0 = stream(0), r1 = stream(1), r2 = stream(2), r3 = stream(3), r4 = stream(4), r5 = stream(5), r6 = stream(6),
      r7 = stream(7), r8 = stream(8), r9 = stream(9), r10 = stream(10);
  report.checks.push_back(sigma_boundaries(r0));
  report.checks.push_back(sigma_monotone(r1));
  report.checks.push_back(sigma_identities(r2));
  report.checks.push_back(transport_oracle(r3));
  report.checks.push_back(transport_enumeration(r4));
  report.checks.push_back(entropy_laws(r5));
  report.checks.push_back(geodesic_speed(r6));
  {
    const SpacePtr cos = make_model_space("cos_model", -1.0, -2.0);
    report.checks.push_back(model_check(r7, "cos_model", -1.0, regular_window(*cos, 0.25)));
  }
  report.checks.push_back(model_check(r8, "power_model", 0.0, {0.5, 3.0}));
  report.checks.push_back(model_check(r9, "sinh_model", 1.0, {0.5, 3.0}));
  report.checks.push_back(kappa_examples());
  report.checks.push_back(io_roundtrip(r10));
  for (const SelftestCheck& c : report.checks) report.passed = report.passed && c.passed;
  return report;
}

io::Json to_json(const SelftestReport& report) {
  io::Json j;
  j["seed"] = report.seed;
  j["passed"] = report.passed;
  io::Json checks = io::Json::array();
  for (const SelftestCheck& c : report.checks) {
    io::Json e;
    e["name"] = c.name;
    e["passed"] = c.passed;
    e["cases"] = c.cases;
    e["worst"] = io::number(c.worst);
    e["tolerance"] = io::number(c.tolerance);
    if (!c.detail.empty()) e["detail"] = c.detail;
    checks.push_back(std::move(e));
  }
  j["checks"] = std::move(checks);
  return j;
}

}  // namespace cdstar
