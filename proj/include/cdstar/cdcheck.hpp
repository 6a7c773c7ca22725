#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdstar/coefficients.hpp"
#include "cdstar/transport.hpp"

namespace cdstar {

enum class Verdict { kPass, kFail, kInconclusive };
std::string_view to_string(Verdict v);

struct MarginEntry {
  double t = 0.0;
  double Nprime = 0.0;
  double S = 0.0;       // S_{N'}(mu_t); may overflow to inf for N' near 0
  double log_S = 0.0;
  ExtendedReal R;       // right-hand side, same caveat
  double log_R = 0.0;   // +inf when vacuous
  double margin = 0.0;  // (R - S) / S, from the logs; +inf when vacuous
  bool vacuous = false;
};

struct CdCheckOptions {
  std::vector<double> t_grid;       // empty: k/16, k = 0..16
  std::vector<double> Nprime_grid;  // empty: 8 log-spaced values in [N, -1e-3]
  std::size_t base_subdivisions = 2;
  std::size_t levels = 3;           // grid resolutions h, h/2, h/4, ...
  double roundoff_floor = 1e-9;     // times 1 + max(1 - 1/N')
};

// Report of one inequality sweep. Margins are those of the finest level.
struct CdVerdict {
  double K = 0.0;
  double N = 0.0;
  std::vector<double> t_grid;
  std::vector<double> Nprime_grid;
  std::vector<MarginEntry> margins;  // t-major
  double worst_margin = 0.0;
  double discretization_note = 0.0;
  std::vector<double> level_notes;   // max |log(R/S)_l - log(R/S)_{l+1}| for successive levels
  double note_ratio = 0.0;           // last level note over the previous one
  Verdict verdict = Verdict::kPass;
  std::optional<MarginEntry> witness;  // worst finite entry
  std::string reason;                  // set for INCONCLUSIVE
  std::vector<std::string> remarks;
};

std::vector<double> default_t_grid();
std::vector<double> default_nprime_grid(double N);

// R_{K,N'}^{(t)}(pi|m) = int sigma^{(1-t)}(d) rho0^{-1/N'} + sigma^{(t)}(d) rho1^{-1/N'} dpi.
// rho0/rho1 are per-point densities of the coupling's source/target.
ExtendedReal r_functional(const DiscreteCoupling& pi, const std::vector<double>& rho0,
                          const std::vector<double>& rho1, double K, double Nprime, double t);
// Densities mu_i / m_i taken from the coupling's own marginals.
ExtendedReal r_functional(const DiscreteCoupling& pi, double K, double Nprime, double t);
// Along the quantile coupling of a geodesic; Simpson per segment.
ExtendedReal r_functional(const QuantileGeodesic& g, double K, double Nprime, double t);
// Its logarithm, +inf when vacuous; finite where the value itself overflows.
double log_r_functional(const QuantileGeodesic& g, double K, double Nprime, double t);

// CD*(K,N) inequality S(mu_t) <= R along the monotone geodesic from mu0 to
// mu1, on the (t, N') grid, with a refinement-based error estimate.
CdVerdict cd_star_check(const GridMeasure& mu0, const GridMeasure& mu1, double K, double N,
                        const CdCheckOptions& options = {});

struct CdMinusReport {
  double K = 0.0;
  double N = 0.0;
  std::vector<double> Kprime_grid;
  std::vector<CdVerdict> per_kprime;
  Verdict verdict = Verdict::kPass;
  // Margins nondecreasing as K' decreases (grid points in common).
  bool monotone_in_kprime = true;
  // For K >= 0: the check at K itself, and whether it agrees with the sweep.
  std::optional<CdVerdict> limit;
  bool limit_agrees = true;
};

// CD*(K-,N): every K' in the grid (all strictly below K) must pass.
CdMinusReport cd_star_minus_check(const GridMeasure& mu0, const GridMeasure& mu1, double K, double N,
                                  const std::vector<double>& Kprime_grid, const CdCheckOptions& options = {});

struct EquivalentFormReport {
  double theta = 0.0;  // inf (K' >= 0) or sup (K' < 0) of distances between supports
  CdVerdict convt;     // S(mu_t) <= sigma^{(1-t)}(theta) S(mu0) + sigma^{(t)}(theta) S(mu1)
  CdVerdict cd;        // the coupling form at K'
  // Wherever the coupling form holds, the theta form holds too.
  bool implication_holds = true;
};

EquivalentFormReport equivalent_form_check(const GridMeasure& mu0, const GridMeasure& mu1, double Kprime,
                                           double N, const CdCheckOptions& options = {});

// Distance extremes between the closed supports of two grid measures.
double support_distance_inf(const GridMeasure& a, const GridMeasure& b);
double support_distance_sup(const GridMeasure& a, const GridMeasure& b);

struct PartitionBlock {
  std::size_t source_cell = 0;
  std::size_t target_cell = 0;
  double alpha = 0.0;
  DiscreteCoupling sub;  // normalized restriction
  double theta = 0.0;    // inf distance between the block marginal supports
};

struct PartitionOptions {
  double Kprime = 0.0;
  double K = 0.0;
  std::optional<double> Ktilde;  // default (K' + K) / 2
  int level = 0;                 // n in the delta_n schedule
};

struct PartitionResult {
  std::vector<PartitionBlock> blocks;      // off-diagonal mass, by (source cell, target cell)
  std::optional<PartitionBlock> diagonal;  // mass on {(x,x)}
  std::optional<double> delta_n;           // [2^n (1 - sqrt(K'/K~))]^{-1} when 0 <= K' < K~
};

// Splits a coupling on a single finite space along a partition of its points.
// Reassembly sum alpha * sub reproduces the input (checked).
PartitionResult partition_coupling(const DiscreteCoupling& coupling, const std::vector<std::vector<std::size_t>>& cells,
                                   const PartitionOptions& options = {});

}  // namespace cdstar
