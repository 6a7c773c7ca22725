#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "cdstar/extended_real.hpp"
#include "cdstar/spaces.hpp"

namespace cdstar {

// Probability measure rho * m on a weighted interval, rho constant on each
// cell [breaks[i], breaks[i+1]]. Densities are with respect to the reference
// measure, not Lebesgue.
class GridMeasure {
 public:
  GridMeasure(SpacePtr space, std::vector<double> breaks, std::vector<double> density);

  // Builds the measure from per-cell probabilities. A cell of infinite
  // reference mass (one touching the singular set) may only carry zero
  // probability; otherwise NotFiniteError.
  static GridMeasure from_cell_masses(SpacePtr space, std::vector<double> breaks,
                                      std::vector<double> probabilities);

  // Normalized m restricted to [a,b], split into `cells` equal pieces.
  static GridMeasure uniform(SpacePtr space, double a, double b, std::size_t cells = 1);

  const SpacePtr& space() const { return space_; }
  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& density() const { return density_; }
  std::size_t cell_count() const { return density_.size(); }
  double cell_lo(std::size_t i) const { return breaks_[i]; }
  double cell_hi(std::size_t i) const { return breaks_[i + 1]; }
  const ExtendedReal& cell_mass(std::size_t i) const { return cell_mass_[i]; }
  double probability(std::size_t i) const { return probability_[i]; }
  const std::vector<double>& probabilities() const { return probability_; }
  // CDF at each breakpoint; cdf().front() == 0, cdf().back() == 1.
  const std::vector<double>& cdf() const { return cdf_; }

  // Closed hull of the positive-density cells.
  std::pair<double, double> support() const;
  // m({rho > 0}).
  double support_mass() const;
  bool has_positive_density(std::size_t i) const { return density_[i] > 0.0; }

  bool operator==(const GridMeasure& other) const;

 private:
  GridMeasure(SpacePtr space, std::vector<double> breaks, std::vector<double> density,
              std::vector<ExtendedReal> cell_mass);
  void finish();

  SpacePtr space_;
  std::vector<double> breaks_;
  std::vector<double> density_;
  std::vector<ExtendedReal> cell_mass_;
  std::vector<double> probability_;
  std::vector<double> cdf_;
};

// Probability measure on a finite metric space.
class DiscreteMeasure {
 public:
  DiscreteMeasure(FiniteSpacePtr space, std::vector<double> masses);

  const FiniteSpacePtr& space() const { return space_; }
  const std::vector<double>& masses() const { return masses_; }
  double mass(std::size_t i) const { return masses_[i]; }
  std::size_t size() const { return masses_.size(); }
  std::vector<std::size_t> support() const;
  double support_mass() const;

  bool operator==(const DiscreteMeasure& other) const;

 private:
  FiniteSpacePtr space_;
  std::vector<double> masses_;
};

// S_{N',m}(mu) = int rho^{1-1/N'} dm, N' < 0.
double renyi_entropy(const GridMeasure& mu, double Nprime);
double renyi_entropy(const DiscreteMeasure& mu, double Nprime);
// log S_{N'}(mu); stays finite where rho^{1-1/N'} overflows (N' near 0).
double log_renyi_entropy(const GridMeasure& mu, double Nprime);
double log_renyi_entropy(const DiscreteMeasure& mu, double Nprime);

struct JensenBound {
  double entropy = 0.0;
  double bound = 0.0;  // m({rho > 0})^{1/N'}
};

// Throws std::logic_error if entropy < bound beyond roundoff.
JensenBound jensen_lower_bound(const GridMeasure& mu, double Nprime);
JensenBound jensen_lower_bound(const DiscreteMeasure& mu, double Nprime);

template <class M>
using MixtureComponents = std::vector<std::pair<double, M>>;

// Mixture sum_j alpha_j mu_j on the union of the component grids.
GridMeasure mixture(const MixtureComponents<GridMeasure>& components);
DiscreteMeasure mixture(const MixtureComponents<DiscreteMeasure>& components);

struct MixtureEntropy {
  double weighted_sum = 0.0;  // sum_j alpha_j^{1-1/N'} S(mu_j)
  double direct = 0.0;        // S(sum_j alpha_j mu_j)
};

// Scaling law for mutually singular components. Throws DomainError when two
// components charge a common cell (grid) or atom (discrete), and
// std::logic_error if the two evaluations differ by more than 1e-9.
MixtureEntropy entropy_of_mixture(const MixtureComponents<GridMeasure>& components, double Nprime);
MixtureEntropy entropy_of_mixture(const MixtureComponents<DiscreteMeasure>& components, double Nprime);

// Same two numbers without the singularity requirement; for overlapping
// components direct >= weighted_sum.
MixtureEntropy mixture_entropy_terms(const MixtureComponents<GridMeasure>& components, double Nprime);
MixtureEntropy mixture_entropy_terms(const MixtureComponents<DiscreteMeasure>& components,
                                     double Nprime);

bool mutually_singular(const GridMeasure& a, const GridMeasure& b);
bool mutually_singular(const DiscreteMeasure& a, const DiscreteMeasure& b);

// The same measure on a finer grid; `breaks` must contain the current ones
// that bound positive-density cells and stay inside the domain.
GridMeasure refine(const GridMeasure& mu, std::vector<double> breaks);

// mu restricted to [c,d] and renormalized.
GridMeasure restrict_and_renormalize(const GridMeasure& mu, double c, double d);

// One atom per positive-probability cell, placed at the cell midpoint with
// reference weight m(cell).
DiscreteMeasure atomize(const GridMeasure& mu);

}  // namespace cdstar
