#include "cdstar/cdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>

#include "cdstar/errors.hpp"
#include "cdstar/logspace.hpp"
#include "cdstar/parallel.hpp"

namespace cdstar {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNoCell = static_cast<std::size_t>(-1);

// Returns log R, +inf when vacuous.
using Rhs = std::function<double(const QuantileGeodesic&, double t, double Nprime)>;

void resolve_grids(double N, const CdCheckOptions& options, std::vector<double>& t_grid,
                   std::vector<double>& nprime_grid) {
  if (!(N < 0.0)) throw DomainError("dimension parameter must be negative");
  t_grid = options.t_grid.empty() ? default_t_grid() : options.t_grid;
  nprime_grid = options.Nprime_grid.empty() ? default_nprime_grid(N) : options.Nprime_grid;
  for (double t : t_grid)
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("t grid must lie in [0,1]");
  for (double np : nprime_grid)
    if (!(np >= N && np < 0.0)) throw DomainError("N' grid must lie in [N, 0)");
  if (options.levels == 0 || options.base_subdivisions == 0) throw DomainError("need at least one grid level");
}

std::vector<std::string> standard_remarks() {
  return {
      "checked along the monotone quantile geodesic; on the line it is the unique optimal one",
      "geodesic convexity of the admissible class is only witnessed by finite entropies along the grid",
      "the sigma-coefficient (reduced) condition is verified, not the tau-coefficient one",
  };
}

CdVerdict sweep(const GridMeasure& mu0, const GridMeasure& mu1, double K, double N, const CdCheckOptions& options,
                const Rhs& rhs) {
  CdVerdict out;
  out.K = K;
  out.N = N;
  resolve_grids(N, options, out.t_grid, out.Nprime_grid);
  out.remarks = standard_remarks();
  const std::size_t nt = out.t_grid.size();
  const std::size_t nn = out.Nprime_grid.size();

  std::vector<std::vector<MarginEntry>> per_level(options.levels);
  try {
    for (std::size_t level = 0; level < options.levels; ++level) {
      const QuantileGeodesic g(mu0, mu1, options.base_subdivisions << level);
      std::vector<MarginEntry>& entries = per_level[level];
      entries.assign(nt * nn, MarginEntry{});
      parallel_for(nt, [&](std::size_t it) {
        const double t = out.t_grid[it];
        for (std::size_t in = 0; in < nn; ++in) {
          MarginEntry& e = entries[it * nn + in];
          e.t = t;
          e.Nprime = out.Nprime_grid[in];
          e.log_S = g.log_entropy(t, e.Nprime);
          e.S = std::exp(e.log_S);
          e.log_R = rhs(g, t, e.Nprime);
          e.vacuous = e.log_R == kInf;
          e.R = e.vacuous ? ExtendedReal::infinity() : ExtendedReal(std::exp(e.log_R));
          e.margin = e.vacuous ? kInf : std::expm1(e.log_R - e.log_S);
        }
      });
    }
  } catch (const NotFiniteError& err) {
    out.verdict = Verdict::kInconclusive;
    out.reason = std::string("interpolant charges the singular set: ") + err.what();
    out.worst_margin = kInf;
    return out;
  }

  out.margins = per_level.back();
  // Relative cell-mass errors reach S through rho^{1-1/N'}.
  double max_q = 0.0;
  for (double np : out.Nprime_grid) max_q = std::max(max_q, 1.0 - 1.0 / np);
  const double floor = options.roundoff_floor * (1.0 + max_q);
  for (std::size_t level = 0; level + 1 < per_level.size(); ++level) {
    double note = 0.0;
    for (std::size_t k = 0; k < out.margins.size(); ++k) {
      const MarginEntry& a = per_level[level][k];
      const MarginEntry& b = per_level[level + 1][k];
      if (a.vacuous || b.vacuous) continue;
      // On log(R/S): for margins m <= 0 a shift dL moves m by (1+m) dL <= dL.
      note = std::max(note, std::abs((a.log_R - a.log_S) - (b.log_R - b.log_S)));
    }
    out.level_notes.push_back(note);
  }
  out.discretization_note = (out.level_notes.empty() ? 0.0 : out.level_notes.back()) + floor;
  if (out.level_notes.size() >= 2 && out.level_notes[out.level_notes.size() - 2] > floor) {
    out.note_ratio = out.level_notes.back() / out.level_notes[out.level_notes.size() - 2];
  }
  out.worst_margin = kInf;
  for (const MarginEntry& e : out.margins) {
    if (e.vacuous) continue;
    if (e.margin < out.worst_margin) {
      out.worst_margin = e.margin;
      out.witness = e;
    }
  }
  out.verdict = out.worst_margin >= -out.discretization_note ? Verdict::kPass : Verdict::kFail;
  return out;
}

}  // namespace

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "PASS";
    case Verdict::kFail: return "FAIL";
    case Verdict::kInconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

std::vector<double> default_t_grid() {
  std::vector<double> g(17);
  for (int k = 0; k <= 16; ++k) g[k] = k / 16.0;
  return g;
}

std::vector<double> default_nprime_grid(double N) {
  if (!(N < 0.0)) throw DomainError("dimension parameter must be negative");
  constexpr double kClosest = -1e-3;
  if (N >= kClosest) return {N};
  std::vector<double> g(8);
  const double a = std::log(-N);
  const double b = std::log(-kClosest);
  for (int k = 0; k < 8; ++k) g[k] = -std::exp(a + (b - a) * k / 7.0);
  g.front() = N;
  g.back() = kClosest;
  return g;
}

ExtendedReal r_functional(const DiscreteCoupling& pi, const std::vector<double>& rho0,
                          const std::vector<double>& rho1, double K, double Nprime, double t) {
  if (rho0.size() != pi.rows() || rho1.size() != pi.cols()) throw DomainError("one density per point required");
  const double p = -1.0 / Nprime;
  double total = 0.0;
  for (std::size_t i = 0; i < pi.rows(); ++i) {
    for (std::size_t j = 0; j < pi.cols(); ++j) {
      const double w = pi.at(i, j);
      if (w <= 0.0) continue;
      const double d = pi.distance(i, j);
      const ExtendedReal s0 = sigma(K, Nprime, 1.0 - t, d);
      const ExtendedReal s1 = sigma(K, Nprime, t, d);
      if (s0.is_infinite() || s1.is_infinite()) return ExtendedReal::infinity();
      total += w * (s0.value() * std::pow(rho0[i], p) + s1.value() * std::pow(rho1[j], p));
    }
  }
  return ExtendedReal(total);
}

ExtendedReal r_functional(const DiscreteCoupling& pi, double K, double Nprime, double t) {
  auto densities = [](const DiscreteMeasure& mu) {
    std::vector<double> rho(mu.size(), 0.0);
    for (std::size_t i : mu.support()) rho[i] = mu.mass(i) / mu.space()->weight(i).value();
    return rho;
  };
  return r_functional(pi, densities(pi.source()), densities(pi.target()), K, Nprime, t);
}

double log_r_functional(const QuantileGeodesic& g, double K, double Nprime, double t) {
  const WeightedInterval& sp = *g.space();
  const double p = 1.0 / Nprime;
  return g.log_integrate([&](const QuantilePoint& q) {
    const double theta = std::abs(q.x1 - q.x0);
    const ExtendedReal s0 = sigma(K, Nprime, 1.0 - t, theta);
    const ExtendedReal s1 = sigma(K, Nprime, t, theta);
    if (s0.is_infinite() || s1.is_infinite()) return kInf;
    return log_add(safe_log(s0.value()) + p * std::log(q.d0 * sp.weight_at(q.x0)),
                   safe_log(s1.value()) + p * std::log(q.d1 * sp.weight_at(q.x1)));
  });
}

ExtendedReal r_functional(const QuantileGeodesic& g, double K, double Nprime, double t) {
  const double l = log_r_functional(g, K, Nprime, t);
  return l == kInf ? ExtendedReal::infinity() : ExtendedReal(std::exp(l));
}

CdVerdict cd_star_check(const GridMeasure& mu0, const GridMeasure& mu1, double K, double N,
                        const CdCheckOptions& options) {
  return sweep(mu0, mu1, K, N, options, [K](const QuantileGeodesic& g, double t, double Nprime) {
    return log_r_functional(g, K, Nprime, t);
  });
}

CdMinusReport cd_star_minus_check(const GridMeasure& mu0, const GridMeasure& mu1, double K, double N,
                                  const std::vector<double>& Kprime_grid, const CdCheckOptions& options) {
  if (Kprime_grid.empty()) throw DomainError("K' grid is empty");
  for (double kp : Kprime_grid)
    if (!(kp < K)) throw DomainError("every K' must lie strictly below K");
  CdMinusReport out;
  out.K = K;
  out.N = N;
  out.Kprime_grid = Kprime_grid;
  bool any_fail = false, any_inconclusive = false;
  for (double kp : Kprime_grid) {
    out.per_kprime.push_back(cd_star_check(mu0, mu1, kp, N, options));
    any_fail |= out.per_kprime.back().verdict == Verdict::kFail;
    any_inconclusive |= out.per_kprime.back().verdict == Verdict::kInconclusive;
  }
  out.verdict = any_fail ? Verdict::kFail : any_inconclusive ? Verdict::kInconclusive : Verdict::kPass;

  std::vector<std::size_t> order(Kprime_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return Kprime_grid[a] > Kprime_grid[b]; });
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    const CdVerdict& hi = out.per_kprime[order[k]];
    const CdVerdict& lo = out.per_kprime[order[k + 1]];
    if (hi.margins.size() != lo.margins.size()) continue;
    const double tol = hi.discretization_note + lo.discretization_note;
    for (std::size_t e = 0; e < hi.margins.size(); ++e) {
      if (lo.margins[e].vacuous) continue;
      if (hi.margins[e].vacuous || lo.margins[e].margin < hi.margins[e].margin - tol) out.monotone_in_kprime = false;
    }
  }
  if (K >= 0.0) {
    out.limit = cd_star_check(mu0, mu1, K, N, options);
    out.limit_agrees = (out.limit->verdict == Verdict::kPass) == (out.verdict == Verdict::kPass);
  }
  return out;
}

double support_distance_inf(const GridMeasure& a, const GridMeasure& b) {
  double best = kInf;
  for (std::size_t i = 0; i < a.cell_count(); ++i) {
    if (!a.has_positive_density(i)) continue;
    for (std::size_t j = 0; j < b.cell_count(); ++j) {
      if (!b.has_positive_density(j)) continue;
      best = std::min(best, std::max({0.0, b.cell_lo(j) - a.cell_hi(i), a.cell_lo(i) - b.cell_hi(j)}));
    }
  }
  return best;
}

double support_distance_sup(const GridMeasure& a, const GridMeasure& b) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.cell_count(); ++i) {
    if (!a.has_positive_density(i)) continue;
    for (std::size_t j = 0; j < b.cell_count(); ++j) {
      if (!b.has_positive_density(j)) continue;
      best = std::max({best, std::abs(b.cell_hi(j) - a.cell_lo(i)), std::abs(a.cell_hi(i) - b.cell_lo(j))});
    }
  }
  return best;
}

EquivalentFormReport equivalent_form_check(const GridMeasure& mu0, const GridMeasure& mu1, double Kprime,
                                           double N, const CdCheckOptions& options) {
  const double theta = Kprime >= 0.0 ? support_distance_inf(mu0, mu1) : support_distance_sup(mu0, mu1);
  std::vector<double> t_grid, nprime_grid;
  resolve_grids(N, options, t_grid, nprime_grid);
  std::vector<double> logS0(nprime_grid.size()), logS1(nprime_grid.size());
  for (std::size_t k = 0; k < nprime_grid.size(); ++k) {
    logS0[k] = log_renyi_entropy(mu0, nprime_grid[k]);
    logS1[k] = log_renyi_entropy(mu1, nprime_grid[k]);
  }
  CdCheckOptions resolved = options;
  resolved.t_grid = t_grid;
  resolved.Nprime_grid = nprime_grid;
  EquivalentFormReport out{theta,
                           sweep(mu0, mu1, Kprime, N, resolved,
                                 [&](const QuantileGeodesic&, double t, double Nprime) {
                                   const std::size_t k = static_cast<std::size_t>(
                                       std::find(nprime_grid.begin(), nprime_grid.end(), Nprime) - nprime_grid.begin());
                                   const ExtendedReal a = sigma(Kprime, Nprime, 1.0 - t, theta);
                                   const ExtendedReal b = sigma(Kprime, Nprime, t, theta);
                                   if (a.is_infinite() || b.is_infinite()) return kInf;
                                   return log_add(safe_log(a.value()) + logS0[k], safe_log(b.value()) + logS1[k]);
                                 }),
                           cd_star_check(mu0, mu1, Kprime, N, resolved), true};
  if (out.convt.margins.size() == out.cd.margins.size()) {
    for (std::size_t e = 0; e < out.cd.margins.size(); ++e) {
      const MarginEntry& cd = out.cd.margins[e];
      const MarginEntry& cv = out.convt.margins[e];
      if (cd.vacuous || cv.vacuous) continue;
      if (cv.margin < cd.margin - out.cd.discretization_note - out.convt.discretization_note) {
        out.implication_holds = false;
      }
    }
  }
  return out;
}

PartitionResult partition_coupling(const DiscreteCoupling& coupling, const std::vector<std::vector<std::size_t>>& cells,
                                   const PartitionOptions& options) {
  const FiniteSpacePtr& space = coupling.source().space();
  if (!(space == coupling.target().space() || *space == *coupling.target().space())) {
    throw DomainError("partition_coupling needs source and target on one space");
  }
  const std::size_t n = space->size();
  std::vector<std::size_t> cell_of(n, kNoCell);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t p : cells[c]) {
      if (p >= n) throw DomainError("partition cell refers to an unknown point");
      if (cell_of[p] != kNoCell) throw DomainError("partition cells overlap");
      cell_of[p] = c;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if ((coupling.source().mass(i) > 0.0 || coupling.target().mass(i) > 0.0) && cell_of[i] == kNoCell) {
      throw DomainError("partition does not cover the support");
    }
  }

  auto make_block = [&](std::size_t a, std::size_t b, auto&& include) -> std::optional<PartitionBlock> {
    double alpha = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (include(i, j)) alpha += coupling.at(i, j);
    if (!(alpha > 0.0)) return std::nullopt;
    std::vector<double> matrix(n * n, 0.0), rows(n, 0.0), cols(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (include(i, j)) {
          matrix[i * n + j] = coupling.at(i, j) / alpha;
          rows[i] += matrix[i * n + j];
          cols[j] += matrix[i * n + j];
        }
    double theta = kInf;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (rows[i] > 0.0 && cols[j] > 0.0) theta = std::min(theta, space->distance(i, j));
    return PartitionBlock{a, b, alpha,
                          DiscreteCoupling(DiscreteMeasure(space, rows), DiscreteMeasure(space, cols), matrix), theta};
  };

  PartitionResult out;
  out.diagonal = make_block(kNoCell, kNoCell, [&](std::size_t i, std::size_t j) { return i == j; });
  for (std::size_t a = 0; a < cells.size(); ++a) {
    for (std::size_t b = 0; b < cells.size(); ++b) {
      auto block = make_block(a, b, [&](std::size_t i, std::size_t j) {
        return i != j && cell_of[i] == a && cell_of[j] == b;
      });
      if (block) out.blocks.push_back(std::move(*block));
    }
  }

  std::vector<double> rebuilt(n * n, 0.0);
  auto add = [&](const PartitionBlock& blk) {
    for (std::size_t k = 0; k < n * n; ++k) rebuilt[k] += blk.alpha * blk.sub.matrix()[k];
  };
  if (out.diagonal) add(*out.diagonal);
  for (const PartitionBlock& blk : out.blocks) add(blk);
  for (std::size_t k = 0; k < n * n; ++k) {
    if (std::abs(rebuilt[k] - coupling.matrix()[k]) > 1e-15) {
      throw std::logic_error("partition blocks do not reassemble the coupling");
    }
  }

  const double ktilde = options.Ktilde.value_or(0.5 * (options.Kprime + options.K));
  if (options.Kprime >= 0.0 && options.Kprime < ktilde) {
    out.delta_n = 1.0 / (std::ldexp(1.0, options.level) * (1.0 - std::sqrt(options.Kprime / ktilde)));
  }
  return out;
}

}  // namespace cdstar
