#include <cmath>
#include <numbers>

#include "cdstar/errors.hpp"
#include "cdstar/measures.hpp"
#include "cdstar/sampling.hpp"
#include "doctest.h"

using namespace cdstar;

namespace {

// Closed form m([a,b]) on power_model(N=-2), 0 < a < b.
double power_mass(double a, double b) { return 1.0 / a - 1.0 / b; }

// sum_i m_i^{1/N'} p_i^{1-1/N'} with the cell masses supplied by the caller.
double entropy_oracle(const std::vector<double>& cell_mass, const std::vector<double>& p, double Np) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += std::pow(cell_mass[i], 1.0 / Np) * std::pow(p[i], 1.0 - 1.0 / Np);
  }
  return s;
}

}  // namespace

TEST_CASE("renyi entropy of uniform measures") {
  const GridMeasure flat = GridMeasure::uniform(make_flat_space(0.0, 4.0), 0.0, 4.0, 3);
  CHECK(renyi_entropy(flat, -1.0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(renyi_entropy(flat, -3.0) == doctest::Approx(std::pow(4.0, -1.0 / 3.0)).epsilon(1e-14));

  const SpacePtr power = make_model_space("power_model", 0.0, -2.0);
  const GridMeasure u = GridMeasure::uniform(power, 1.0, 2.0, 5);
  for (double Np : {-1.0, -2.0, -7.5}) {
    CHECK(std::abs(renyi_entropy(u, Np) - std::pow(0.5, 1.0 / Np)) <= 1e-8);
  }

  const FiniteSpacePtr two = std::make_shared<const FiniteMetricSpace>(
      FiniteMetricSpace::on_line({0.0, 1.0}, {ExtendedReal(2.0), ExtendedReal(2.0)}));
  CHECK(renyi_entropy(DiscreteMeasure(two, {0.5, 0.5}), -1.0) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("renyi entropy: nonuniform two-atom example") {
  const FiniteSpacePtr two = std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::on_line({0.0, 1.0}));
  const DiscreteMeasure mu(two, {0.25, 0.75});
  const double expected = std::pow(0.25, 1.5) + std::pow(0.75, 1.5);
  CHECK(renyi_entropy(mu, -2.0) == doctest::Approx(expected).epsilon(1e-15));
  const JensenBound jb = jensen_lower_bound(mu, -2.0);
  CHECK(jb.bound == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-15));
  CHECK(jb.entropy > jb.bound);
  CHECK(log_renyi_entropy(mu, -2.0) == doctest::Approx(std::log(expected)).epsilon(1e-14));
}

TEST_CASE("renyi entropy agrees with closed-form cell masses") {
  const SpacePtr power = make_model_space("power_model", 0.0, -2.0);
  Rng rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    const GridMeasure mu = random_grid_measure(power, 0.5, 3.0, rng);
    std::vector<double> cm;
    for (std::size_t i = 0; i < mu.cell_count(); ++i) cm.push_back(power_mass(mu.cell_lo(i), mu.cell_hi(i)));
    const double Np = rng.uniform(-6.0, -1.0);
    CHECK(renyi_entropy(mu, Np) == doctest::Approx(entropy_oracle(cm, mu.probabilities(), Np)).epsilon(1e-9));
  }
}

TEST_CASE("entropy domain and finiteness") {
  const SpacePtr power = make_model_space("power_model", 0.0, -2.0);
  const GridMeasure u = GridMeasure::uniform(power, 1.0, 2.0);
  CHECK_THROWS_AS(renyi_entropy(u, 0.0), DomainError);
  CHECK_THROWS_AS(renyi_entropy(u, 0.5), DomainError);
  CHECK_THROWS_AS(GridMeasure::uniform(power, -1.0, 1.0), NotFiniteError);
  CHECK_THROWS(GridMeasure::from_cell_masses(power, {-1.0, 1.0}, {1.0}));
  CHECK_THROWS_AS(GridMeasure(power, {1.0, 2.0}, {3.0}), DomainError);  // total mass 1.5
}

TEST_CASE("jensen bound: equality for uniform, strict otherwise, unit support") {
  const SpacePtr power = make_model_space("power_model", 0.0, -2.0);
  const GridMeasure u = GridMeasure::uniform(power, 1.0, 3.0, 4);
  const JensenBound eq = jensen_lower_bound(u, -2.0);
  CHECK(eq.entropy == doctest::Approx(eq.bound).epsilon(1e-12));

  const GridMeasure unit = GridMeasure::uniform(make_flat_space(0.0, 1.0), 0.0, 1.0);
  for (double Np : {-0.5, -1.0, -4.0}) CHECK(jensen_lower_bound(unit, Np).bound == doctest::Approx(1.0));

  Rng rng(32);
  for (int rep = 0; rep < 100; ++rep) {
    const GridMeasure mu = random_grid_measure(power, 0.3, 4.0, rng);
    const JensenBound jb = jensen_lower_bound(mu, rng.uniform(-5.0, -1.0));
    CHECK(jb.entropy >= jb.bound * (1.0 - 1e-12));
  }
}

TEST_CASE("mixtures of mutually singular measures") {
  const SpacePtr flat = make_flat_space(0.0, 10.0);
  const GridMeasure a = GridMeasure::uniform(flat, 0.0, 2.0);
  const GridMeasure b = GridMeasure::uniform(flat, 5.0, 7.0);
  CHECK(mutually_singular(a, b));
  const MixtureComponents<GridMeasure> comps{{0.5, a}, {0.5, b}};
  const MixtureEntropy me = entropy_of_mixture(comps, -1.0);
  CHECK(me.direct == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(me.weighted_sum == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(renyi_entropy(mixture(comps), -1.0) == doctest::Approx(0.25).epsilon(1e-14));

  const MixtureEntropy single = entropy_of_mixture(MixtureComponents<GridMeasure>{{1.0, a}}, -2.0);
  CHECK(single.direct == doctest::Approx(renyi_entropy(a, -2.0)).epsilon(1e-15));

  const GridMeasure c = GridMeasure::uniform(flat, 1.0, 3.0);
  CHECK_FALSE(mutually_singular(a, c));
  CHECK_THROWS_AS(entropy_of_mixture(MixtureComponents<GridMeasure>{{0.5, a}, {0.5, c}}, -1.0), DomainError);
  CHECK_THROWS_AS(mixture(MixtureComponents<GridMeasure>{{0.4, a}, {0.4, b}}), DomainError);

  // Touching at an endpoint is still singular.
  CHECK(mutually_singular(a, GridMeasure::uniform(flat, 2.0, 3.0)));
}

TEST_CASE("mixture scaling property: three random disjoint blocks") {
  const SpacePtr power = make_model_space("power_model", 0.0, -2.0);
  Rng rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    MixtureComponents<GridMeasure> comps;
    double w[3], total = 0.0;
    for (double& x : w) total += (x = rng.uniform(0.05, 1.0));
    for (int j = 0; j < 3; ++j) {
      const double lo = 0.5 + 1.5 * j;
      comps.emplace_back(w[j] / total, random_grid_measure(power, lo, lo + 1.0, rng));
    }
    comps.back().first = 1.0 - comps[0].first - comps[1].first;
    const double Np = rng.uniform(-6.0, -1.0);
    const MixtureEntropy me = entropy_of_mixture(comps, Np);
    CHECK(std::abs(me.direct - me.weighted_sum) <= 1e-9 * std::max(1.0, me.direct));
  }
}

TEST_CASE("discrete mixtures and singularity") {
  const FiniteSpacePtr line = std::make_shared<const FiniteMetricSpace>(FiniteMetricSpace::on_line({0, 1, 2, 3}));
  const DiscreteMeasure a(line, {0.5, 0.5, 0.0, 0.0});
  const DiscreteMeasure b(line, {0.0, 0.0, 0.25, 0.75});
  CHECK(mutually_singular(a, b));
  const MixtureEntropy me = entropy_of_mixture(MixtureComponents<DiscreteMeasure>{{0.3, a}, {0.7, b}}, -2.0);
  CHECK(me.direct == doctest::Approx(me.weighted_sum).epsilon(1e-14));
  CHECK_FALSE(mutually_singular(a, DiscreteMeasure(line, {0.0, 1.0, 0.0, 0.0})));
}

TEST_CASE("refine, restrict and atomize") {
  const SpacePtr power = make_model_space("power_model", 0.0, -2.0);
  const GridMeasure mu = GridMeasure::from_cell_masses(power, {1.0, 2.0, 4.0}, {0.25, 0.75});
  const GridMeasure fine = refine(mu, {1.0, 1.5, 2.0, 3.0, 4.0});
  CHECK(fine.cell_count() == 4);
  CHECK(fine.probability(0) + fine.probability(1) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(fine.probability(0) == doctest::Approx(0.25 * power_mass(1.0, 1.5) / power_mass(1.0, 2.0)).epsilon(1e-10));
  CHECK(renyi_entropy(fine, -2.0) == doctest::Approx(renyi_entropy(mu, -2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(refine(mu, {1.0, 3.0, 4.0}), DomainError);

  const GridMeasure r = restrict_and_renormalize(mu, 2.0, 4.0);
  CHECK(r.support_mass() > 0.0);
  CHECK(r.support().first == doctest::Approx(2.0));

  const DiscreteMeasure at = atomize(mu);
  REQUIRE(at.size() == 2);
  CHECK(at.mass(0) == doctest::Approx(0.25).epsilon(1e-15));
  REQUIRE(at.space()->coords());
  CHECK((*at.space()->coords())[0] == doctest::Approx(1.5));
}
