#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdstar/cdcheck.hpp"
#include "cdstar/sampling.hpp"

namespace cdstar {

// num / 2^exp, kept reduced (num odd or exp == 0).
struct Dyadic {
  std::int64_t num = 0;
  int exp = 0;

  static Dyadic of(std::int64_t num, int exp);
  // Exact conversion; DomainError unless x = n / 2^e with e <= max_exp.
  static Dyadic from_double(double x, int max_exp = 40);

  double value() const;
  Dyadic operator+(const Dyadic& o) const;
  Dyadic operator-(const Dyadic& o) const;
  Dyadic operator*(const Dyadic& o) const;
  bool operator==(const Dyadic& o) const = default;
  std::strong_ordering operator<=>(const Dyadic& o) const;
};

std::string to_string(const Dyadic& d);

struct CkOptions {
  std::vector<double> r_grid;       // empty: j/8, j = 0..8 (dyadic values only)
  std::vector<double> Nprime_grid;  // empty: default_nprime_grid(N)
  // Pairs start on 2^{-P} Z; default k + 1 so that midpoints of the
  // level-(k+1) recursion are on the grid.
  std::optional<int> pair_exponent;
  double roundoff_floor = 1e-9;  // times 1 + max(1 - 1/N')
};

struct CkEntry {
  Dyadic s, t;
  double r = 0.0;
  double Nprime = 0.0;
  double log_S_s = 0.0, log_S_t = 0.0, log_S_x = 0.0;  // x = s + r (t - s)
  ExtendedReal sigma_lo, sigma_hi;                     // sigma^{(1-r)}, sigma^{(r)} at theta^k
  double log_bound = 0.0;   // log of sigma_lo S(s) + sigma_hi S(t); +inf when vacuous
  double slack = 0.0;       // (bound - S(x)) / S(x)
  double tolerance = 0.0;
  bool vacuous = false;
};

struct CkReport {
  int k = 0;
  int pair_exponent = 1;
  double K = 0.0, Kprime = 0.0, N = 0.0;
  double theta0 = 0.0;
  double theta_k = 0.0;  // theta0 * 2^{-k}
  std::vector<std::pair<Dyadic, Dyadic>> pairs;
  std::vector<double> r_grid;
  std::vector<double> Nprime_grid;
  std::vector<CkEntry> entries;  // pair-major, then r, then N'
  double worst_slack = 0.0;
  std::optional<CkEntry> witness;
  Verdict verdict = Verdict::kPass;
};

// Minimal (K' >= 0) or maximal (K' < 0) coupled distance |x1 - x0| on the
// geodesic's segment nodes.
double theta_zero(const QuantileGeodesic& g, double Kprime);

// Property C(k) along g: for every dyadic pair (s, s + 2^{-k}) and (r, N') in
// the grids, S(G(s + r 2^{-k})) <= sigma^{(1-r)}(theta^k) S(G(s)) + sigma^{(r)}(theta^k) S(G(t)).
// Throws NotFiniteError if an interpolant charges the singular set.
CkReport check_Ck(const QuantileGeodesic& g, double K, double Kprime, double N, int k,
                  const CkOptions& options = {});

struct RecursionEntry {
  Dyadic s, t;
  double r = 0.0;
  double Nprime = 0.0;
  double log_derived = 0.0;  // bound chained from level k
  double log_direct = 0.0;   // sigma bound at theta^{k-1}
  double gap = 0.0;          // |derived / direct - 1|
  bool flagged = false;      // 1 - 2 sigma^{(1/2)}(theta^k)^2 <= 0
  bool vacuous = false;
};

struct RecursionReport {
  int from_k = 0;
  CkReport direct;  // C(k-1) checked directly
  std::vector<RecursionEntry> entries;
  double max_gap = 0.0;
  std::size_t flagged = 0;
  bool inputs_hold = true;   // the level-k inequalities used by the chain all hold
  bool bounds_agree = true;  // max_gap <= 1e-8
  Verdict verdict = Verdict::kPass;
};

// C(k) => C(k-1): the level k-1 bound is derived from the level-k
// inequalities through the midpoint estimate and compared with the direct
// bound. Needs report_k.verdict == PASS and k >= 1.
RecursionReport recursion_step(const CkReport& report_k, const QuantileGeodesic& g, const CkOptions& options = {});

// Smallest kappa >= 0 with 2^{2-kappa} R <= lambda.
int choose_kappa(double R, double lambda);

struct CoverCell {
  double lo = 0.0, hi = 0.0;    // L_j
  double x_lo = 0.0, x_hi = 0.0;  // X_j: lambda-fattened, kept off the singular set
  bool usable = true;
};

struct LocalDraw {
  std::size_t cell = 0;
  CdVerdict verdict;
};

struct BlockCheck {
  Dyadic s, t;
  std::size_t cell = 0;
  double u_lo = 0.0, u_hi = 0.0;
  double alpha = 0.0;
  double theta = 0.0;  // theta_j of the block sub-geodesic
  bool theta_ok = true;  // theta_j >= theta^kappa (K' >= 0) or <= (K' < 0)
  bool contained = true;  // the sub-geodesic stays in X_j
  double worst_slack = 0.0;  // block inequality with theta_j
  std::optional<std::pair<double, double>> worst_at;  // (r, N')
};

struct AssemblyEntry {
  Dyadic s, t;
  double r = 0.0;
  double Nprime = 0.0;
  double equality_gap = 0.0;  // mixture scaling at s, x and t, relative
  double log_block_sum = 0.0;  // sum_j alpha_j^{1-1/N'} (block bound)
  double log_global_bound = 0.0;
  bool sum_inequality = true;  // block sum <= global bound
  double assembled_slack = 0.0;  // global bound vs S(x) through the blocks
  bool vacuous = false;
};

struct CoverWitness {
  std::string stage;  // "local", "C(kappa)", "assembly"
  std::optional<std::size_t> cell;
  double t = 0.0;
  double Nprime = 0.0;
  double margin = 0.0;
};

struct LocalCoverOptions {
  std::optional<double> lambda;   // default: domain length / 10 (4R / 10 on unbounded domains)
  std::size_t cell_count = 8;
  double kprime_offset = 0.1;     // K' = K - offset
  std::size_t draws_per_cell = 2;
  std::uint64_t seed = 42;
  std::optional<int> kappa_override;
  std::optional<double> singular_margin;  // default lambda / 2
  std::size_t subdivisions = 2;
  CdCheckOptions cd;
  CkOptions ck;
  GridSampleOptions sample;
  // Global marginals; drawn inside B_R(o) when absent.
  std::optional<std::pair<GridMeasure, GridMeasure>> marginals;
};

struct LocalCoverReport {
  double R = 0.0, o = 0.0, K = 0.0, N = 0.0, Kprime = 0.0, lambda = 0.0;
  int kappa = 0;
  std::vector<CoverCell> cells;
  std::vector<LocalDraw> local;
  std::optional<CkReport> ck_kappa;
  std::vector<RecursionReport> chain;  // k = kappa, ..., 1
  std::vector<BlockCheck> blocks;
  std::vector<AssemblyEntry> assembly;
  double theta0 = 0.0;
  double theta_support = 0.0;  // distance between the marginal supports
  bool theta_relation = true;  // theta0 >= inf distance (K' >= 0), <= sup distance (K' < 0)
  double max_equality_gap = 0.0;
  std::size_t mixture_law_checks = 0;
  bool assembly_holds = true;
  Verdict verdict = Verdict::kPass;
  std::optional<CoverWitness> witness;
  std::string reason;
  std::vector<std::string> remarks;
};

LocalCoverReport local_cover_check(const SpacePtr& space, double R, double o, double K, double N,
                                   const LocalCoverOptions& options = {});

}  // namespace cdstar
