#include "cdstar/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cdstar/errors.hpp"
#include "cdstar/logspace.hpp"

namespace cdstar {
namespace {

constexpr double kProbabilityTolerance = 1e-9;
constexpr double kMixtureTolerance = 1e-9;

void check_nprime(double Nprime) {
  if (!(Nprime < 0.0)) throw DomainError("entropy exponent requires N' < 0, got " + std::to_string(Nprime));
}

double exponent(double Nprime) { return 1.0 - 1.0 / Nprime; }

// Index of the cell of `mu` containing [a,b], or npos when [a,b] lies outside
// the grid. Throws if [a,b] crosses a breakpoint.
std::size_t enclosing_cell(const GridMeasure& mu, double a, double b) {
  const auto& br = mu.breaks();
  if (b <= br.front() || a >= br.back()) return static_cast<std::size_t>(-1);
  if (a < br.front() || b > br.back()) throw DomainError("cell crosses the boundary of the source grid");
  auto it = std::upper_bound(br.begin(), br.end(), a);
  std::size_t i = static_cast<std::size_t>(it - br.begin()) - 1;
  i = std::min(i, mu.cell_count() - 1);
  if (a < br[i] || b > br[i + 1]) throw DomainError("target grid does not refine the source grid");
  return i;
}

// Density of mu on the sub-cell [a,b] (0 outside the grid).
double density_on(const GridMeasure& mu, double a, double b) {
  const std::size_t i = enclosing_cell(mu, a, b);
  return i == static_cast<std::size_t>(-1) ? 0.0 : mu.density()[i];
}

bool same_space(const SpacePtr& a, const SpacePtr& b) { return a == b || (a && b && *a == *b); }

bool intervals_overlap(double a, double b, double c, double d) { return std::max(a, c) < std::min(b, d); }

template <class M>
void check_weights(const MixtureComponents<M>& components) {
  if (components.empty()) throw DomainError("mixture needs at least one component");
  double total = 0.0;
  for (const auto& [alpha, mu] : components) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("mixture weights must be nonnegative");
    total += alpha;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("mixture weights must sum to 1");
}

}  // namespace

GridMeasure::GridMeasure(SpacePtr space, std::vector<double> breaks, std::vector<double> density)
    : space_(std::move(space)), breaks_(std::move(breaks)), density_(std::move(density)) {
  finish();
}

GridMeasure::GridMeasure(SpacePtr space, std::vector<double> breaks, std::vector<double> density,
                         std::vector<ExtendedReal> cell_mass)
    : space_(std::move(space)),
      breaks_(std::move(breaks)),
      density_(std::move(density)),
      cell_mass_(std::move(cell_mass)) {
  finish();
}

void GridMeasure::finish() {
  if (!space_) throw DomainError("grid measure needs a space");
  if (breaks_.size() < 2 || density_.size() + 1 != breaks_.size()) {
    throw DomainError("grid measure needs n+1 breakpoints for n densities");
  }
  for (std::size_t i = 0; i < breaks_.size(); ++i) {
    if (!std::isfinite(breaks_[i])) throw DomainError("grid breakpoints must be finite (bounded support)");
    if (i > 0 && !(breaks_[i] > breaks_[i - 1])) throw DomainError("grid breakpoints must increase strictly");
  }
  if (breaks_.front() < space_->lo() || breaks_.back() > space_->hi()) {
    throw DomainError("grid leaves the domain of '" + space_->name() + "'");
  }
  for (double rho : density_) {
    if (!std::isfinite(rho) || rho < 0.0) throw DomainError("densities must be finite and nonnegative");
  }
  const std::size_t n = density_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (density_[i] > 0.0 && !space_->singular_points_inside(breaks_[i], breaks_[i + 1]).empty()) {
      throw DomainError("a charged cell straddles a singular point");
    }
  }
  if (cell_mass_.size() != n) {
    cell_mass_.resize(n);
    for (std::size_t i = 0; i < n; ++i) cell_mass_[i] = space_->reference_mass(breaks_[i], breaks_[i + 1]);
  }
  probability_.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (density_[i] == 0.0) continue;
    if (cell_mass_[i].is_infinite()) {
      throw NotFiniteError("positive density on the cell [" + std::to_string(breaks_[i]) + ", " +
                           std::to_string(breaks_[i + 1]) + "] of infinite reference mass");
    }
    probability_[i] = density_[i] * cell_mass_[i].value();
    total += probability_[i];
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw DomainError("grid measure has total mass " + std::to_string(total) + ", expected 1");
  }
  cdf_.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cdf_[i + 1] = cdf_[i] + probability_[i];
  for (double& c : cdf_) c /= cdf_.back();
  cdf_.back() = 1.0;
}

GridMeasure GridMeasure::from_cell_masses(SpacePtr space, std::vector<double> breaks,
                                          std::vector<double> probabilities) {
  if (!space) throw DomainError("grid measure needs a space");
  if (breaks.size() != probabilities.size() + 1) throw DomainError("n+1 breakpoints for n cell masses");
  double total = 0.0;
  for (double p : probabilities) {
    if (!std::isfinite(p) || p < 0.0) throw DomainError("cell masses must be finite and nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw DomainError("cell masses sum to " + std::to_string(total) + ", expected 1");
  }
  const std::size_t n = probabilities.size();
  std::vector<ExtendedReal> masses(n);
  std::vector<double> density(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(breaks[i] < breaks[i + 1])) throw DomainError("grid breakpoints must increase strictly");
    if (probabilities[i] > 0.0 && !space->singular_points_inside(breaks[i], breaks[i + 1]).empty()) {
      throw NotFiniteError("positive mass on a cell containing a singular point");
    }
    masses[i] = space->reference_mass(breaks[i], breaks[i + 1]);
    if (probabilities[i] == 0.0) continue;
    if (masses[i].is_infinite()) {
      throw NotFiniteError("positive mass on the cell [" + std::to_string(breaks[i]) + ", " +
                           std::to_string(breaks[i + 1]) + "] of infinite reference mass");
    }
    density[i] = probabilities[i] / total / masses[i].value();
  }
  return GridMeasure(std::move(space), std::move(breaks), std::move(density), std::move(masses));
}

GridMeasure GridMeasure::uniform(SpacePtr space, double a, double b, std::size_t cells) {
  if (cells == 0 || !(a < b)) throw DomainError("uniform measure needs a < b and at least one cell");
  if (!space) throw DomainError("grid measure needs a space");
  const ExtendedReal total = space->reference_mass(a, b);
  if (total.is_infinite()) throw NotFiniteError("uniform measure on a set of infinite reference mass");
  std::vector<double> breaks(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) breaks[i] = a + (b - a) * static_cast<double>(i) / cells;
  breaks.back() = b;
  std::vector<double> density(cells, 1.0 / total.value());
  return GridMeasure(std::move(space), std::move(breaks), std::move(density));
}

std::pair<double, double> GridMeasure::support() const {
  std::size_t first = 0;
  while (density_[first] == 0.0) ++first;
  std::size_t last = density_.size() - 1;
  while (density_[last] == 0.0) --last;
  return {breaks_[first], breaks_[last + 1]};
}

double GridMeasure::support_mass() const {
  double total = 0.0;
  for (std::size_t i = 0; i < density_.size(); ++i) {
    if (density_[i] > 0.0) total += cell_mass_[i].value();
  }
  return total;
}

bool GridMeasure::operator==(const GridMeasure& other) const {
  return same_space(space_, other.space_) && breaks_ == other.breaks_ && density_ == other.density_;
}

DiscreteMeasure::DiscreteMeasure(FiniteSpacePtr space, std::vector<double> masses)
    : space_(std::move(space)), masses_(std::move(masses)) {
  if (!space_) throw DomainError("discrete measure needs a space");
  if (masses_.size() != space_->size()) throw DomainError("one mass per point required");
  double total = 0.0;
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    if (!std::isfinite(masses_[i]) || masses_[i] < 0.0) throw DomainError("masses must be nonnegative");
    if (masses_[i] > 0.0 && space_->is_singular(i)) {
      throw NotFiniteError("discrete measure charges the singular atom " + space_->label(i));
    }
    total += masses_[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("discrete masses sum to " + std::to_string(total));
}

std::vector<std::size_t> DiscreteMeasure::support() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    if (masses_[i] > 0.0) out.push_back(i);
  }
  return out;
}

double DiscreteMeasure::support_mass() const {
  double total = 0.0;
  for (std::size_t i : support()) total += space_->weight(i).value();
  return total;
}

bool DiscreteMeasure::operator==(const DiscreteMeasure& other) const {
  return (space_ == other.space_ || *space_ == *other.space_) && masses_ == other.masses_;
}

double renyi_entropy(const GridMeasure& mu, double Nprime) {
  check_nprime(Nprime);
  const double q = exponent(Nprime);
  double total = 0.0;
  for (std::size_t i = 0; i < mu.cell_count(); ++i) {
    const double rho = mu.density()[i];
    if (rho > 0.0) total += mu.cell_mass(i).value() * std::pow(rho, q);
  }
  return total;
}

double renyi_entropy(const DiscreteMeasure& mu, double Nprime) {
  check_nprime(Nprime);
  const double q = exponent(Nprime);
  double total = 0.0;
  for (std::size_t i : mu.support()) {
    const double m = mu.space()->weight(i).value();
    total += m * std::pow(mu.mass(i) / m, q);
  }
  return total;
}

double log_renyi_entropy(const GridMeasure& mu, double Nprime) {
  check_nprime(Nprime);
  const double q = exponent(Nprime);
  std::vector<double> terms;
  for (std::size_t i = 0; i < mu.cell_count(); ++i) {
    const double rho = mu.density()[i];
    if (rho > 0.0) terms.push_back(std::log(mu.cell_mass(i).value()) + q * std::log(rho));
  }
  return log_sum_exp(terms);
}

double log_renyi_entropy(const DiscreteMeasure& mu, double Nprime) {
  check_nprime(Nprime);
  const double q = exponent(Nprime);
  std::vector<double> terms;
  for (std::size_t i : mu.support()) {
    const double m = mu.space()->weight(i).value();
    terms.push_back(std::log(m) + q * std::log(mu.mass(i) / m));
  }
  return log_sum_exp(terms);
}

namespace {

template <class M>
JensenBound jensen_impl(const M& mu, double Nprime) {
  JensenBound out;
  out.entropy = renyi_entropy(mu, Nprime);
  out.bound = std::pow(mu.support_mass(), 1.0 / Nprime);
  if (out.entropy < out.bound * (1.0 - 1e-12) - 1e-300) {
    throw std::logic_error("Jensen bound violated: S=" + std::to_string(out.entropy) +
                           " < " + std::to_string(out.bound));
  }
  return out;
}

}  // namespace

JensenBound jensen_lower_bound(const GridMeasure& mu, double Nprime) { return jensen_impl(mu, Nprime); }
JensenBound jensen_lower_bound(const DiscreteMeasure& mu, double Nprime) { return jensen_impl(mu, Nprime); }

GridMeasure mixture(const MixtureComponents<GridMeasure>& components) {
  check_weights(components);
  const SpacePtr& space = components.front().second.space();
  std::vector<double> breaks;
  for (const auto& [alpha, mu] : components) {
    if (!same_space(space, mu.space())) throw DomainError("mixture components live on different spaces");
    breaks.insert(breaks.end(), mu.breaks().begin(), mu.breaks().end());
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  std::vector<double> density(breaks.size() - 1, 0.0);
  for (std::size_t c = 0; c + 1 < breaks.size(); ++c) {
    for (const auto& [alpha, mu] : components) {
      if (alpha > 0.0) density[c] += alpha * density_on(mu, breaks[c], breaks[c + 1]);
    }
  }
  return GridMeasure(space, std::move(breaks), std::move(density));
}

DiscreteMeasure mixture(const MixtureComponents<DiscreteMeasure>& components) {
  check_weights(components);
  const FiniteSpacePtr& space = components.front().second.space();
  std::vector<double> masses(space->size(), 0.0);
  for (const auto& [alpha, mu] : components) {
    if (!(mu.space() == space || *mu.space() == *space)) {
      throw DomainError("mixture components live on different spaces");
    }
    for (std::size_t i = 0; i < masses.size(); ++i) masses[i] += alpha * mu.mass(i);
  }
  return DiscreteMeasure(space, std::move(masses));
}

bool mutually_singular(const GridMeasure& a, const GridMeasure& b) {
  for (std::size_t i = 0; i < a.cell_count(); ++i) {
    if (!a.has_positive_density(i)) continue;
    for (std::size_t j = 0; j < b.cell_count(); ++j) {
      if (b.has_positive_density(j) && intervals_overlap(a.cell_lo(i), a.cell_hi(i), b.cell_lo(j), b.cell_hi(j))) {
        return false;
      }
    }
  }
  return true;
}

bool mutually_singular(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.mass(i) > 0.0 && b.mass(i) > 0.0) return false;
  }
  return true;
}

namespace {

template <class M>
MixtureEntropy mixture_terms_impl(const MixtureComponents<M>& components, double Nprime) {
  check_nprime(Nprime);
  MixtureEntropy out;
  const double q = exponent(Nprime);
  for (const auto& [alpha, mu] : components) {
    if (alpha > 0.0) out.weighted_sum += std::pow(alpha, q) * renyi_entropy(mu, Nprime);
  }
  out.direct = renyi_entropy(mixture(components), Nprime);
  return out;
}

template <class M>
MixtureEntropy mixture_impl(const MixtureComponents<M>& components, double Nprime) {
  for (std::size_t i = 0; i < components.size(); ++i) {
    for (std::size_t j = i + 1; j < components.size(); ++j) {
      if (components[i].first > 0.0 && components[j].first > 0.0 &&
          !mutually_singular(components[i].second, components[j].second)) {
        throw DomainError("mixture components " + std::to_string(i) + " and " + std::to_string(j) +
                          " are not mutually singular");
      }
    }
  }
  MixtureEntropy out = mixture_terms_impl(components, Nprime);
  if (std::abs(out.direct - out.weighted_sum) > kMixtureTolerance * std::max(1.0, std::abs(out.direct))) {
    throw std::logic_error("mixture scaling law off: direct " + std::to_string(out.direct) + " vs " +
                           std::to_string(out.weighted_sum));
  }
  return out;
}

}  // namespace

MixtureEntropy entropy_of_mixture(const MixtureComponents<GridMeasure>& components, double Nprime) {
  return mixture_impl(components, Nprime);
}
MixtureEntropy entropy_of_mixture(const MixtureComponents<DiscreteMeasure>& components, double Nprime) {
  return mixture_impl(components, Nprime);
}
MixtureEntropy mixture_entropy_terms(const MixtureComponents<GridMeasure>& components, double Nprime) {
  return mixture_terms_impl(components, Nprime);
}
MixtureEntropy mixture_entropy_terms(const MixtureComponents<DiscreteMeasure>& components,
                                     double Nprime) {
  return mixture_terms_impl(components, Nprime);
}

GridMeasure refine(const GridMeasure& mu, std::vector<double> breaks) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  if (breaks.size() < 2) throw DomainError("refinement needs at least two breakpoints");
  std::vector<double> density(breaks.size() - 1);
  for (std::size_t c = 0; c + 1 < breaks.size(); ++c) density[c] = density_on(mu, breaks[c], breaks[c + 1]);
  return GridMeasure(mu.space(), std::move(breaks), std::move(density));
}

GridMeasure restrict_and_renormalize(const GridMeasure& mu, double c, double d) {
  if (!(c < d)) throw DomainError("restriction needs c < d");
  std::vector<double> breaks{c, d};
  for (double b : mu.breaks()) {
    if (b > c && b < d) breaks.push_back(b);
  }
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> density(breaks.size() - 1);
  std::vector<double> probs(breaks.size() - 1, 0.0);
  double total = 0.0;
  std::vector<ExtendedReal> masses(density.size());
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    density[i] = density_on(mu, breaks[i], breaks[i + 1]);
    if (density[i] > 0.0) {
      masses[i] = mu.space()->reference_mass(breaks[i], breaks[i + 1]);
      probs[i] = density[i] * masses[i].value();
      total += probs[i];
    }
  }
  if (!(total > 0.0)) throw DomainError("restriction to a set of zero mass");
  for (double& p : probs) p /= total;
  return GridMeasure::from_cell_masses(mu.space(), std::move(breaks), std::move(probs));
}

DiscreteMeasure atomize(const GridMeasure& mu) {
  std::vector<double> coords;
  std::vector<ExtendedReal> weights;
  std::vector<double> masses;
  for (std::size_t i = 0; i < mu.cell_count(); ++i) {
    if (mu.probability(i) <= 0.0) continue;
    coords.push_back(0.5 * (mu.cell_lo(i) + mu.cell_hi(i)));
    weights.push_back(mu.cell_mass(i));
    masses.push_back(mu.probability(i));
  }
  const double total = std::accumulate(masses.begin(), masses.end(), 0.0);
  for (double& m : masses) m /= total;
  auto space = std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::on_line(std::move(coords), std::move(weights)));
  return DiscreteMeasure(std::move(space), std::move(masses));
}

}  // namespace cdstar
