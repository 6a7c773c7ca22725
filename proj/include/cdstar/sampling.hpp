#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cdstar/measures.hpp"

namespace cdstar {

// mt19937_64 with its own uniform mapping, so sampled instances are the same
// on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0,1), 53 bits
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  std::size_t below(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct GridSampleOptions {
  std::size_t max_cells = 8;
  double gap_probability = 0.15;  // chance for an interior cell to carry no mass
  double min_relative_width = 0.2;  // support hull length over window length, at least
  double density_spread = 4.0;    // max/min ratio of charged cell probabilities per length
};

// Random grid measure with support hull inside [lo, hi].
GridMeasure random_grid_measure(const SpacePtr& space, double lo, double hi, Rng& rng,
                                const GridSampleOptions& options = {});

// Interior window of the domain: [lo, hi] shrunk by `margin` from every
// singular point and endpoint. Infinite domains are cut at +-span. Returns the
// longest regular stretch.
std::pair<double, double> regular_window(const WeightedInterval& space, double margin, double span = 4.0);

// n points on the line with random spacings and weights in [0.5, 2].
FiniteSpacePtr random_line_space(std::size_t n, Rng& rng);

// Random probability vector on `support_size` random points of `space`.
DiscreteMeasure random_discrete_measure(const FiniteSpacePtr& space, std::size_t support_size, Rng& rng);

// Uniform masses 1/n on all n points.
DiscreteMeasure equal_mass_measure(const FiniteSpacePtr& space);

}  // namespace cdstar
