#include "cdstar/localglobal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "cdstar/errors.hpp"
#include "cdstar/logspace.hpp"
#include "cdstar/parallel.hpp"

namespace cdstar {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBoundAgreement = 1e-8;

std::vector<double> resolve_r_grid(const CkOptions& options) {
  if (!options.r_grid.empty()) return options.r_grid;
  std::vector<double> g(9);
  for (int j = 0; j <= 8; ++j) g[j] = j / 8.0;
  return g;
}

std::vector<double> resolve_nprime_grid(const CkOptions& options, double N) {
  std::vector<double> g = options.Nprime_grid.empty() ? default_nprime_grid(N) : options.Nprime_grid;
  for (double np : g)
    if (!(np >= N && np < 0.0)) throw DomainError("N' grid must lie in [N, 0)");
  return g;
}

double max_exponent(const std::vector<double>& nprime_grid) {
  double q = 0.0;
  for (double np : nprime_grid) q = std::max(q, 1.0 - 1.0 / np);
  return q;
}

// log S at a set of dyadic times on g, and on g with doubled subdivisions.
struct EntropyTable {
  std::map<Dyadic, std::size_t> index;
  std::size_t width = 0;
  std::vector<double> coarse;
  std::vector<double> fine;

  double log_S(const Dyadic& t, std::size_t n) const { return coarse[index.at(t) * width + n]; }
  double rel_err(const Dyadic& t, std::size_t n) const {
    const std::size_t k = index.at(t) * width + n;
    return std::abs(std::expm1(fine[k] - coarse[k]));
  }
};

EntropyTable entropy_table(const QuantileGeodesic& g, const std::vector<Dyadic>& times,
                           const std::vector<double>& nprime_grid) {
  EntropyTable table;
  table.width = nprime_grid.size();
  std::vector<Dyadic> list;
  for (const Dyadic& t : times) {
    if (table.index.emplace(t, list.size()).second) list.push_back(t);
  }
  table.coarse.assign(list.size() * table.width, 0.0);
  table.fine.assign(list.size() * table.width, 0.0);
  const QuantileGeodesic fine = g.with_subdivisions(2 * g.subdivisions());
  parallel_for(list.size(), [&](std::size_t i) {
    for (std::size_t n = 0; n < table.width; ++n) {
      table.coarse[i * table.width + n] = g.log_entropy(list[i].value(), nprime_grid[n]);
      table.fine[i * table.width + n] = fine.log_entropy(list[i].value(), nprime_grid[n]);
    }
  });
  return table;
}

double log_sigma(const ExtendedReal& s) { return s.is_infinite() ? kInf : safe_log(s.value()); }

// Longest stretch of [a, b] inside the domain that avoids the singular set,
// preferring the one containing `anchor`, pulled `margin` away from
// singular points.
std::optional<std::pair<double, double>> clip_regular(const WeightedInterval& space, double a, double b,
                                                      double margin, double anchor) {
  a = std::max(a, space.lo());
  b = std::min(b, space.hi());
  if (!(a < b)) return std::nullopt;
  std::vector<double> cuts{a};
  for (double p : space.singular_points_inside(a, b)) cuts.push_back(p);
  cuts.push_back(b);
  std::optional<std::pair<double, double>> best;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i] + (space.is_singular(cuts[i]) ? margin : 0.0);
    const double hi = cuts[i + 1] - (space.is_singular(cuts[i + 1]) ? margin : 0.0);
    if (!(lo < hi)) continue;
    const bool has_anchor = anchor >= cuts[i] && anchor <= cuts[i + 1];
    if (has_anchor) return std::make_pair(lo, hi);
    if (!best || hi - lo > best->second - best->first) best = std::make_pair(lo, hi);
  }
  return best;
}

}  // namespace

// ---- Dyadic ----

Dyadic Dyadic::of(std::int64_t num, int exp) {
  while (exp < 0) {
    num *= 2;
    ++exp;
  }
  while (exp > 0 && num % 2 == 0) {
    num /= 2;
    --exp;
  }
  if (num == 0) exp = 0;
  return Dyadic{num, exp};
}

Dyadic Dyadic::from_double(double x, int max_exp) {
  for (int e = 0; e <= max_exp; ++e) {
    const double y = std::ldexp(x, e);
    if (y == std::floor(y) && std::abs(y) < 0x1.0p62) return of(static_cast<std::int64_t>(y), e);
  }
  throw DomainError("value " + std::to_string(x) + " is not a dyadic rational");
}

double Dyadic::value() const { return std::ldexp(static_cast<double>(num), -exp); }

Dyadic Dyadic::operator+(const Dyadic& o) const {
  const int e = std::max(exp, o.exp);
  return of(num * (std::int64_t{1} << (e - exp)) + o.num * (std::int64_t{1} << (e - o.exp)), e);
}

Dyadic Dyadic::operator-(const Dyadic& o) const { return *this + Dyadic{-o.num, o.exp}; }

Dyadic Dyadic::operator*(const Dyadic& o) const { return of(num * o.num, exp + o.exp); }

std::strong_ordering Dyadic::operator<=>(const Dyadic& o) const {
  const int e = std::max(exp, o.exp);
  return num * (std::int64_t{1} << (e - exp)) <=> o.num * (std::int64_t{1} << (e - o.exp));
}

std::string to_string(const Dyadic& d) {
  if (d.exp == 0) return std::to_string(d.num);
  return std::to_string(d.num) + "/" + std::to_string(std::int64_t{1} << d.exp);
}

// ---- C(k) ----

double theta_zero(const QuantileGeodesic& g, double Kprime) {
  return Kprime >= 0.0 ? g.min_pair_distance() : g.max_pair_distance();
}

CkReport check_Ck(const QuantileGeodesic& g, double K, double Kprime, double N, int k, const CkOptions& options) {
  if (k < 0 || k > 30) throw DomainError("k must lie in [0, 30]");
  if (!(N < 0.0)) throw DomainError("dimension parameter must be negative");
  CkReport rep;
  rep.k = k;
  rep.pair_exponent = options.pair_exponent.value_or(k + 1);
  if (rep.pair_exponent < k || rep.pair_exponent > 30) throw DomainError("pair exponent must lie in [k, 30]");
  rep.K = K;
  rep.Kprime = Kprime;
  rep.N = N;
  rep.theta0 = theta_zero(g, Kprime);
  rep.theta_k = std::ldexp(rep.theta0, -k);
  rep.r_grid = resolve_r_grid(options);
  rep.Nprime_grid = resolve_nprime_grid(options, N);

  std::vector<Dyadic> r_dyadic;
  for (double r : rep.r_grid) {
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("r grid must lie in [0,1]");
    r_dyadic.push_back(Dyadic::from_double(r, 20));
  }
  const Dyadic one = Dyadic::of(1, 0);
  const Dyadic step = Dyadic::of(1, k);
  const Dyadic grid = Dyadic::of(1, rep.pair_exponent);
  std::vector<Dyadic> times;
  for (Dyadic s = Dyadic::of(0, 0); s + step <= one; s = s + grid) {
    rep.pairs.emplace_back(s, s + step);
    times.push_back(s);
    times.push_back(s + step);
    for (const Dyadic& r : r_dyadic) times.push_back(s + r * step);
  }
  const EntropyTable table = entropy_table(g, times, rep.Nprime_grid);
  const double floor = options.roundoff_floor * (1.0 + max_exponent(rep.Nprime_grid));

  rep.worst_slack = kInf;
  for (const auto& [s, t] : rep.pairs) {
    for (std::size_t ir = 0; ir < r_dyadic.size(); ++ir) {
      const Dyadic x = s + r_dyadic[ir] * step;
      for (std::size_t n = 0; n < rep.Nprime_grid.size(); ++n) {
        CkEntry e;
        e.s = s;
        e.t = t;
        e.r = rep.r_grid[ir];
        e.Nprime = rep.Nprime_grid[n];
        e.log_S_s = table.log_S(s, n);
        e.log_S_t = table.log_S(t, n);
        e.log_S_x = table.log_S(x, n);
        e.sigma_lo = sigma(Kprime, e.Nprime, 1.0 - e.r, rep.theta_k);
        e.sigma_hi = sigma(Kprime, e.Nprime, e.r, rep.theta_k);
        e.vacuous = e.sigma_lo.is_infinite() || e.sigma_hi.is_infinite();
        if (e.vacuous) {
          e.log_bound = kInf;
          e.slack = kInf;
        } else {
          const double la = log_sigma(e.sigma_lo) + e.log_S_s;
          const double lb = log_sigma(e.sigma_hi) + e.log_S_t;
          e.log_bound = log_add(la, lb);
          e.slack = std::expm1(e.log_bound - e.log_S_x);
          e.tolerance = std::exp(la - e.log_S_x) * table.rel_err(s, n) +
                        std::exp(lb - e.log_S_x) * table.rel_err(t, n) + table.rel_err(x, n) + floor;
          if (e.slack < rep.worst_slack) {
            rep.worst_slack = e.slack;
          }
          if (e.slack < -e.tolerance && (!rep.witness || e.slack < rep.witness->slack)) {
            rep.verdict = Verdict::kFail;
            rep.witness = e;
          }
        }
        rep.entries.push_back(e);
      }
    }
  }
  if (!rep.witness) {
    for (const CkEntry& e : rep.entries) {
      if (!e.vacuous && e.slack == rep.worst_slack) {
        rep.witness = e;
        break;
      }
    }
  }
  return rep;
}

RecursionReport recursion_step(const CkReport& report_k, const QuantileGeodesic& g, const CkOptions& options) {
  if (report_k.k < 1) throw DomainError("recursion_step needs k >= 1");
  if (report_k.verdict != Verdict::kPass) throw DomainError("recursion_step needs a passing C(k) report");
  const int k = report_k.k;
  CkOptions direct_options = options;
  direct_options.pair_exponent = report_k.pair_exponent;
  direct_options.r_grid = report_k.r_grid;
  direct_options.Nprime_grid = report_k.Nprime_grid;

  RecursionReport out;
  out.from_k = k;
  out.direct = check_Ck(g, report_k.K, report_k.Kprime, report_k.N, k - 1, direct_options);
  out.verdict = out.direct.verdict;

  std::map<std::tuple<Dyadic, Dyadic, std::size_t>, const CkEntry*> level_k;
  for (const CkEntry& e : report_k.entries) {
    const std::size_t n = static_cast<std::size_t>(
        std::find(report_k.Nprime_grid.begin(), report_k.Nprime_grid.end(), e.Nprime) - report_k.Nprime_grid.begin());
    level_k[{e.s, Dyadic::from_double(e.r, 20), n}] = &e;
  }
  auto holds = [&](const Dyadic& s, const Dyadic& r, std::size_t n) {
    auto it = level_k.find({s, r, n});
    if (it == level_k.end()) return false;
    return it->second->vacuous || it->second->slack >= -it->second->tolerance;
  };

  const double theta = report_k.theta_k;
  const double Kp = report_k.Kprime;
  const Dyadic half = Dyadic::of(1, 1);
  const Dyadic quarter_step = Dyadic::of(1, k + 1);
  const Dyadic step = Dyadic::of(1, k);
  for (const CkEntry& d : out.direct.entries) {
    RecursionEntry e;
    e.s = d.s;
    e.t = d.t;
    e.r = d.r;
    e.Nprime = d.Nprime;
    e.log_direct = d.log_bound;
    const std::size_t n = static_cast<std::size_t>(
        std::find(report_k.Nprime_grid.begin(), report_k.Nprime_grid.end(), d.Nprime) - report_k.Nprime_grid.begin());

    const ExtendedReal sh = sigma(Kp, d.Nprime, 0.5, theta);
    const bool sh_inf = sh.is_infinite();
    const double den = sh_inf ? -kInf : 1.0 - 2.0 * sh.value() * sh.value();
    if (!(den > 0.0)) {
      e.flagged = true;
      e.vacuous = true;
      ++out.flagged;
      out.entries.push_back(e);
      continue;
    }
    const double c = sh.value() * sh.value() / den;
    ExtendedReal a_near, a_far;
    double A = 0.0, B = 0.0;
    bool vac = false;
    const Dyadic r = Dyadic::from_double(d.r, 20);
    const Dyadic m = d.s + step;
    bool inputs = holds(d.s, half, n) && holds(m, half, n) && holds(d.s + quarter_step, half, n);
    if (d.r <= 0.5) {
      a_near = sigma(Kp, d.Nprime, 1.0 - 2.0 * d.r, theta);
      a_far = sigma(Kp, d.Nprime, 2.0 * d.r, theta);
      vac = a_near.is_infinite() || a_far.is_infinite();
      if (!vac) {
        A = a_near.value() + a_far.value() * c;
        B = a_far.value() * c;
      }
      inputs = inputs && holds(d.s, r * Dyadic::of(2, 0), n);
    } else {
      a_near = sigma(Kp, d.Nprime, 2.0 - 2.0 * d.r, theta);
      a_far = sigma(Kp, d.Nprime, 2.0 * d.r - 1.0, theta);
      vac = a_near.is_infinite() || a_far.is_infinite();
      if (!vac) {
        A = a_near.value() * c;
        B = a_near.value() * c + a_far.value();
      }
      inputs = inputs && holds(m, r * Dyadic::of(2, 0) - Dyadic::of(1, 0), n);
    }
    if (vac || d.vacuous) {
      e.vacuous = true;
      out.entries.push_back(e);
      continue;
    }
    out.inputs_hold = out.inputs_hold && inputs;
    e.log_derived = log_add(safe_log(A) + d.log_S_s, safe_log(B) + d.log_S_t);
    e.gap = std::abs(std::expm1(e.log_derived - e.log_direct));
    out.max_gap = std::max(out.max_gap, e.gap);
    out.entries.push_back(e);
  }
  out.bounds_agree = out.max_gap <= kBoundAgreement;
  return out;
}

int choose_kappa(double R, double lambda) {
  if (!(R > 0.0) || !(lambda > 0.0)) throw DomainError("choose_kappa needs R > 0 and lambda > 0");
  int kappa = 0;
  while (std::ldexp(R, 2 - kappa) > lambda) ++kappa;
  return kappa;
}

// ---- covering ----

LocalCoverReport local_cover_check(const SpacePtr& space, double R, double o, double K, double N,
                                   const LocalCoverOptions& options) {
  if (!(R > 0.0)) throw DomainError("ball radius must be positive");
  if (!space->contains(o)) throw DomainError("ball center outside the domain");
  if (options.cell_count == 0) throw DomainError("cell_count must be positive");
  LocalCoverReport rep;
  rep.R = R;
  rep.o = o;
  rep.K = K;
  rep.N = N;
  rep.Kprime = K - options.kprime_offset;
  const bool bounded = std::isfinite(space->lo()) && std::isfinite(space->hi());
  rep.lambda = options.lambda.value_or(bounded ? (space->hi() - space->lo()) / 10.0 : 0.4 * R);
  if (!(rep.lambda > 0.0)) throw DomainError("lambda must be positive");
  rep.kappa = options.kappa_override.value_or(choose_kappa(R, rep.lambda));
  if (rep.kappa < 0 || rep.kappa > 20) throw DomainError("kappa must lie in [0, 20]");
  const double margin = options.singular_margin.value_or(rep.lambda / 2.0);
  rep.remarks = {
      "C(kappa) is checked on one sampled geodesic; coverage of all geodesics in the ball is not claimed",
      "local checks use the claimed K, the assembly and recursion use K' = K - offset",
  };

  // L_j: equal cells of the closed 2R-ball, split at singular points.
  const double box_lo = std::max(o - 2.0 * R, space->lo());
  const double box_hi = std::min(o + 2.0 * R, space->hi());
  for (std::size_t j = 0; j < options.cell_count; ++j) {
    const double a = box_lo + (box_hi - box_lo) * static_cast<double>(j) / static_cast<double>(options.cell_count);
    const double b = j + 1 == options.cell_count
                         ? box_hi
                         : box_lo + (box_hi - box_lo) * static_cast<double>(j + 1) / static_cast<double>(options.cell_count);
    std::vector<double> cuts{a};
    for (double p : space->singular_points_inside(a, b)) cuts.push_back(p);
    cuts.push_back(b);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      CoverCell cell;
      cell.lo = cuts[i];
      cell.hi = cuts[i + 1];
      const auto x = clip_regular(*space, cell.lo - rep.lambda, cell.hi + rep.lambda, margin,
                                  0.5 * (cell.lo + cell.hi));
      cell.usable = x.has_value();
      if (x) {
        cell.x_lo = x->first;
        cell.x_hi = x->second;
      }
      rep.cells.push_back(cell);
    }
  }
  auto cell_of = [&](double x) {
    std::size_t j = 0;
    while (j + 1 < rep.cells.size() && x >= rep.cells[j + 1].lo) ++j;
    return j;
  };

  Rng rng(options.seed);
  bool inconclusive = false;
  auto fail = [&](CoverWitness w, std::string why) {
    if (rep.verdict != Verdict::kFail) {
      rep.verdict = Verdict::kFail;
      rep.witness = std::move(w);
      rep.reason = std::move(why);
    }
  };

  // Local checks inside each X_j.
  for (std::size_t j = 0; j < rep.cells.size(); ++j) {
    const CoverCell& cell = rep.cells[j];
    if (!cell.usable) continue;
    for (std::size_t d = 0; d < options.draws_per_cell; ++d) {
      const GridMeasure mu0 = random_grid_measure(space, cell.x_lo, cell.x_hi, rng, options.sample);
      const GridMeasure mu1 = random_grid_measure(space, cell.x_lo, cell.x_hi, rng, options.sample);
      LocalDraw draw{j, cd_star_check(mu0, mu1, K, N, options.cd)};
      if (draw.verdict.verdict == Verdict::kFail) {
        fail(CoverWitness{"local", j, draw.verdict.witness->t, draw.verdict.witness->Nprime,
                          draw.verdict.worst_margin},
             "local CD check failed in X_" + std::to_string(j));
      } else if (draw.verdict.verdict == Verdict::kInconclusive) {
        inconclusive = true;
      }
      rep.local.push_back(std::move(draw));
    }
  }

  // Global geodesic inside B_R(o).
  auto draw_marginals = [&]() -> std::pair<GridMeasure, GridMeasure> {
    if (options.marginals) return *options.marginals;
    const auto ball = clip_regular(*space, o - R, o + R, margin, o);
    if (!ball) throw DomainError("B_R(o) has no regular part");
    GridMeasure a = random_grid_measure(space, ball->first, ball->second, rng, options.sample);
    GridMeasure b = random_grid_measure(space, ball->first, ball->second, rng, options.sample);
    return {std::move(a), std::move(b)};
  };
  const auto [mu0, mu1] = draw_marginals();
  rep.theta_support =
      rep.Kprime >= 0.0 ? support_distance_inf(mu0, mu1) : support_distance_sup(mu0, mu1);

  try {
    const QuantileGeodesic base(mu0, mu1, options.subdivisions);
    const int P = rep.kappa + 1;
    const Dyadic one = Dyadic::of(1, 0);
    const Dyadic step = Dyadic::of(1, rep.kappa);
    const Dyadic grid = Dyadic::of(1, P);

    // Quantile levels where G(s) crosses a cell boundary become segment boundaries.
    std::vector<double> extra;
    for (Dyadic s = Dyadic::of(0, 0); s + step <= one; s = s + grid) {
      for (std::size_t j = 1; j < rep.cells.size(); ++j) {
        const double b = rep.cells[j].lo;
        double lo = 0.0, hi = 1.0;
        if (base.position(0.0, s.value()) >= b || base.position(std::nextafter(1.0, 0.0), s.value()) < b) continue;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (lo + hi);
          (base.position(mid, s.value()) < b ? lo : hi) = mid;
        }
        if (hi > 1e-12 && hi < 1.0 - 1e-12) extra.push_back(hi);
      }
    }
    const QuantileGeodesic g = base.refined_at(extra);

    CkOptions ck = options.ck;
    ck.pair_exponent = P;
    rep.ck_kappa = check_Ck(g, K, rep.Kprime, N, rep.kappa, ck);
    const CkReport& ckr = *rep.ck_kappa;
    rep.theta0 = ckr.theta0;
    rep.theta_relation = rep.Kprime >= 0.0 ? rep.theta0 >= rep.theta_support - 1e-12
                                           : rep.theta0 <= rep.theta_support + 1e-12;
    if (ckr.verdict == Verdict::kPass) {
      const CkReport* current = &ckr;
      for (int k = rep.kappa; k >= 1; --k) {
        rep.chain.push_back(recursion_step(*current, g, ck));
        current = &rep.chain.back().direct;
        if (current->verdict != Verdict::kPass) break;
      }
    }

    // Blocks: per level-kappa pair, group segments by the cell holding G(s).
    struct BlockWork {
      BlockCheck check;
      std::vector<double> log_S;  // (tau index, N') with tau in {0, r grid..., 1}
      std::vector<double> log_bound;  // (r, N') block bound with theta_j
      std::size_t seg_first = 0, seg_last = 0;  // segments of g, inclusive
    };
    const std::vector<double>& r_grid = ckr.r_grid;
    const std::vector<double>& np_grid = ckr.Nprime_grid;
    const std::size_t nr = r_grid.size(), nn = np_grid.size();
    std::vector<BlockWork> work;
    std::vector<std::pair<std::size_t, std::size_t>> pair_blocks;  // [first, last) in work
    for (const auto& [s, t] : ckr.pairs) {
      const std::size_t first = work.size();
      const auto& segs = g.segments();
      std::size_t i = 0;
      while (i < segs.size()) {
        const std::size_t c = cell_of(segs[i].at_mid(s.value()));
        std::size_t e = i;
        while (e + 1 < segs.size() && cell_of(segs[e + 1].at_mid(s.value())) == c) ++e;
        BlockWork w;
        w.check.s = s;
        w.check.t = t;
        w.check.cell = c;
        w.check.u_lo = segs[i].u_lo;
        w.check.u_hi = segs[e].u_hi;
        w.check.alpha = w.check.u_hi - w.check.u_lo;
        w.seg_first = i;
        w.seg_last = e;
        work.push_back(std::move(w));
        i = e + 1;
      }
      pair_blocks.emplace_back(first, work.size());
    }

    const double theta_k = ckr.theta_k;
    parallel_for(work.size(), [&](std::size_t b) {
      BlockWork& w = work[b];
      BlockCheck& bc = w.check;
      const QuantileGeodesic sub =
          (bc.alpha < 1.0 ? g.restrict_u(bc.u_lo, bc.u_hi) : g).restrict_time(bc.s.value(), bc.t.value());
      bc.theta = theta_zero(sub, rep.Kprime);
      const double eps = 1e-12 * (1.0 + theta_k);
      bc.theta_ok = rep.Kprime >= 0.0 ? bc.theta >= theta_k - eps : bc.theta <= theta_k + eps;
      const CoverCell& cell = rep.cells[bc.cell];
      const double lo = std::min(sub.mu0().support().first, sub.mu1().support().first);
      const double hi = std::max(sub.mu0().support().second, sub.mu1().support().second);
      bc.contained = cell.usable && lo >= cell.x_lo - 1e-12 && hi <= cell.x_hi + 1e-12;

      std::vector<double> taus{0.0};
      taus.insert(taus.end(), r_grid.begin(), r_grid.end());
      taus.push_back(1.0);
      w.log_S.assign(taus.size() * nn, 0.0);
      for (std::size_t it = 0; it < taus.size(); ++it) {
        for (std::size_t n = 0; n < nn; ++n) w.log_S[it * nn + n] = sub.log_entropy(taus[it], np_grid[n]);
      }
      const std::size_t last = taus.size() - 1;
      w.log_bound.assign(nr * nn, kInf);
      bc.worst_slack = kInf;
      for (std::size_t ir = 0; ir < nr; ++ir) {
        for (std::size_t n = 0; n < nn; ++n) {
          const ExtendedReal a = sigma(rep.Kprime, np_grid[n], 1.0 - r_grid[ir], bc.theta);
          const ExtendedReal c = sigma(rep.Kprime, np_grid[n], r_grid[ir], bc.theta);
          if (a.is_infinite() || c.is_infinite()) continue;
          const double lb = log_add(log_sigma(a) + w.log_S[n], log_sigma(c) + w.log_S[last * nn + n]);
          w.log_bound[ir * nn + n] = lb;
          const double slack = std::expm1(lb - w.log_S[(ir + 1) * nn + n]);
          if (slack < bc.worst_slack) {
            bc.worst_slack = slack;
            bc.worst_at = std::make_pair(r_grid[ir], np_grid[n]);
          }
        }
      }
    });

    std::map<std::tuple<Dyadic, std::size_t, std::size_t>, const CkEntry*> ck_at;
    {
      std::size_t idx = 0;
      for (std::size_t p = 0; p < ckr.pairs.size(); ++p)
        for (std::size_t ir = 0; ir < nr; ++ir)
          for (std::size_t n = 0; n < nn; ++n) ck_at[{ckr.pairs[p].first, ir, n}] = &ckr.entries[idx++];
    }
    const double tol = ck.roundoff_floor * (1.0 + max_exponent(np_grid));
    for (std::size_t p = 0; p < ckr.pairs.size(); ++p) {
      const auto [first, last] = pair_blocks[p];
      for (std::size_t ir = 0; ir < nr; ++ir) {
        for (std::size_t n = 0; n < nn; ++n) {
          const CkEntry& ce = *ck_at.at({ckr.pairs[p].first, ir, n});
          const double q = 1.0 - 1.0 / np_grid[n];
          AssemblyEntry a;
          a.s = ce.s;
          a.t = ce.t;
          a.r = ce.r;
          a.Nprime = ce.Nprime;
          auto mixed = [&](std::size_t tau) {
            std::vector<double> terms;
            for (std::size_t b = first; b < last; ++b)
              terms.push_back(q * std::log(work[b].check.alpha) + work[b].log_S[tau * nn + n]);
            return log_sum_exp(terms);
          };
          const double mix_s = mixed(0), mix_x = mixed(ir + 1), mix_t = mixed(nr + 1);
          a.equality_gap = std::max({std::abs(std::expm1(mix_s - ce.log_S_s)), std::abs(std::expm1(mix_x - ce.log_S_x)),
                                     std::abs(std::expm1(mix_t - ce.log_S_t))});
          rep.max_equality_gap = std::max(rep.max_equality_gap, a.equality_gap);
          std::vector<double> bound_terms;
          for (std::size_t b = first; b < last; ++b)
            bound_terms.push_back(q * std::log(work[b].check.alpha) + work[b].log_bound[ir * nn + n]);
          a.log_block_sum = log_sum_exp(bound_terms);
          a.log_global_bound = ce.log_bound;
          a.vacuous = ce.vacuous;
          if (!a.vacuous) {
            a.sum_inequality = a.log_block_sum - a.log_global_bound <= tol;
            a.assembled_slack = std::expm1(a.log_global_bound - mix_x);
          } else {
            a.assembled_slack = kInf;
          }
          if (a.equality_gap > tol || !a.sum_inequality) rep.assembly_holds = false;
          rep.assembly.push_back(a);
        }
        // The library scaling law, on the first N' where values stay finite.
        if (last - first > 1 && work[first].log_S[(ir + 1) * nn] < 600.0) {
          // Blocks cut the pair interpolant at shared breakpoints; separately
          // built block interpolants would disagree there by roundoff.
          const QuantileGeodesic whole = g.restrict_time(ckr.pairs[p].first.value(), ckr.pairs[p].second.value());
          const GridMeasure mu = displacement_interpolate(whole, r_grid[ir]);
          const auto& wsegs = whole.segments();
          MixtureComponents<GridMeasure> comps;
          auto snap = [&](double x) {
            const auto& br = mu.breaks();
            auto it = std::lower_bound(br.begin(), br.end(), x);
            if (it == br.end()) return br.back();
            if (it != br.begin() && x - *std::prev(it) < *it - x) --it;
            return *it;
          };
          for (std::size_t b = first; b < last; ++b) {
            const double c = snap(wsegs[work[b].seg_first].at_lo(r_grid[ir]));
            const double d = snap(wsegs[work[b].seg_last].at_hi(r_grid[ir]));
            comps.emplace_back(work[b].check.alpha, restrict_and_renormalize(mu, c, d));
          }
          try {
            entropy_of_mixture(comps, np_grid.front());
          } catch (const std::exception&) {
            rep.assembly_holds = false;
          }
          ++rep.mixture_law_checks;
        }
      }
    }
    bool uncovered = false;
    for (BlockWork& w : work) {
      if (!w.check.theta_ok) rep.assembly_holds = false;
      uncovered = uncovered || !w.check.contained;
      rep.blocks.push_back(std::move(w.check));
    }
    // A block outside every checked X_j is a coverage gap, not a counterexample.
    if (uncovered) {
      inconclusive = true;
      if (rep.reason.empty()) rep.reason = "a block leaves the checked neighbourhoods X_j";
    }

    if (ckr.verdict == Verdict::kFail) {
      const CkEntry& we = *ckr.witness;
      std::optional<std::size_t> cell;
      double worst = kInf;
      for (const BlockCheck& bc : rep.blocks) {
        if (bc.s == we.s && bc.worst_slack < worst) {
          worst = bc.worst_slack;
          cell = bc.cell;
        }
      }
      fail(CoverWitness{"C(kappa)", cell, (we.s + Dyadic::from_double(we.r, 20) * step).value(), we.Nprime, we.slack},
           "C(kappa) fails on the global geodesic");
    }
    for (const RecursionReport& rr : rep.chain) {
      if (rr.verdict == Verdict::kFail || !rr.bounds_agree || !rr.inputs_hold) {
        std::optional<CoverWitness> w;
        if (rr.direct.witness) {
          const CkEntry& we = *rr.direct.witness;
          w = CoverWitness{"recursion", std::nullopt, we.s.value() + we.r * (we.t - we.s).value(), we.Nprime, we.slack};
        }
        fail(w.value_or(CoverWitness{"recursion", std::nullopt, 0.0, 0.0, 0.0}), "recursion from C(" + std::to_string(rr.from_k) + ") broke");
      }
    }
    if (!rep.assembly_holds || !rep.theta_relation) {
      fail(CoverWitness{"assembly", std::nullopt, 0.0, 0.0, 0.0}, "block assembly identities or theta relations do not hold");
    }
  } catch (const NotFiniteError& err) {
    inconclusive = true;
    if (rep.reason.empty()) rep.reason = std::string("interpolant charges the singular set: ") + err.what();
  }
  if (rep.verdict != Verdict::kFail && inconclusive) {
    rep.verdict = Verdict::kInconclusive;
    if (rep.reason.empty()) rep.reason = "a local check was inconclusive";
  }
  return rep;
}

}  // namespace cdstar
