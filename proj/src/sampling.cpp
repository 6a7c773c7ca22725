#include "cdstar/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cdstar/errors.hpp"

namespace cdstar {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw DomainError("Rng::below(0)");
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

GridMeasure random_grid_measure(const SpacePtr& space, double lo, double hi, Rng& rng,
                                const GridSampleOptions& options) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("sampling window must be finite");
  if (!space->singular_points_inside(lo, hi).empty() || space->is_singular(lo) || space->is_singular(hi)) {
    throw DomainError("sampling window touches the singular set");
  }
  const double len = hi - lo;
  const double width = len * rng.uniform(options.min_relative_width, 1.0);
  const double a = lo + rng.uniform(0.0, len - width);
  const double b = a + width;
  const std::size_t cells = 1 + rng.below(std::max<std::size_t>(options.max_cells, 1));

  std::vector<double> breaks{a, b};
  for (std::size_t i = 1; i < cells; ++i) breaks.push_back(rng.uniform(a, b));
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  const std::size_t n = breaks.size() - 1;
  std::vector<double> probabilities(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool interior = i > 0 && i + 1 < n;
    if (interior && rng.bernoulli(options.gap_probability)) continue;
    const double level = std::exp(rng.uniform(0.0, std::log(options.density_spread)));
    probabilities[i] = level * space->reference_mass(breaks[i], breaks[i + 1]).value();
    total += probabilities[i];
  }
  for (double& p : probabilities) p /= total;
  return GridMeasure::from_cell_masses(space, std::move(breaks), std::move(probabilities));
}

std::pair<double, double> regular_window(const WeightedInterval& space, double margin, double span) {
  std::vector<double> cuts{std::isfinite(space.lo()) ? space.lo() : -span};
  const double top = std::isfinite(space.hi()) ? space.hi() : span;
  for (double p : space.singular_set()) {
    if (p > cuts.front() && p < top) cuts.push_back(p);
  }
  cuts.push_back(top);
  std::sort(cuts.begin(), cuts.end());
  std::pair<double, double> best{0.0, 0.0};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const bool lo_open = space.is_singular(cuts[i]) || cuts[i] == space.lo();
    const bool hi_open = space.is_singular(cuts[i + 1]) || cuts[i + 1] == space.hi();
    const double a = cuts[i] + (lo_open ? margin : 0.0);
    const double b = cuts[i + 1] - (hi_open ? margin : 0.0);
    if (b - a > best.second - best.first) best = {a, b};
  }
  if (!(best.second > best.first)) throw DomainError("no regular window of positive length");
  return best;
}

FiniteSpacePtr random_line_space(std::size_t n, Rng& rng) {
  std::vector<double> coords(n);
  double x = 0.0;
  for (double& c : coords) {
    x += rng.uniform(0.1, 1.0);
    c = x;
  }
  std::vector<ExtendedReal> weights(n);
  for (ExtendedReal& w : weights) w = ExtendedReal(rng.uniform(0.5, 2.0));
  return std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::on_line(std::move(coords), std::move(weights)));
}

DiscreteMeasure random_discrete_measure(const FiniteSpacePtr& space, std::size_t support_size, Rng& rng) {
  const std::size_t n = space->size();
  support_size = std::clamp<std::size_t>(support_size, 1, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < support_size; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  std::vector<double> masses(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < support_size; ++i) {
    masses[idx[i]] = rng.uniform(0.1, 1.0);
    total += masses[idx[i]];
  }
  for (double& m : masses) m /= total;
  return DiscreteMeasure(space, std::move(masses));
}

DiscreteMeasure equal_mass_measure(const FiniteSpacePtr& space) {
  return DiscreteMeasure(space, std::vector<double>(space->size(), 1.0 / static_cast<double>(space->size())));
}

}  // namespace cdstar
