#include <cmath>

#include "cdstar/errors.hpp"
#include "cdstar/localglobal.hpp"
#include "doctest.h"

using namespace cdstar;

namespace {

CkOptions small_ck() {
  CkOptions o;
  o.r_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  o.Nprime_grid = {-1.0, -0.5, -0.2};
  return o;
}

QuantileGeodesic cos_geodesic() {
  const SpacePtr space = make_model_space("cos_model", -1.0, -2.0);
  const GridMeasure mu0 = GridMeasure::from_cell_masses(space, {-1.2, -0.8, -0.3}, {0.6, 0.4});
  const GridMeasure mu1 = GridMeasure::from_cell_masses(space, {0.2, 0.7, 1.3}, {0.3, 0.7});
  return w2_quantile(mu0, mu1, 4).geodesic;
}

}  // namespace

TEST_CASE("choose_kappa: listed values and the defining inequality") {
  CHECK(choose_kappa(1.0, 4.0) == 0);
  CHECK(choose_kappa(1.0, 1.0) == 2);
  CHECK(choose_kappa(3.0, 0.5) == 5);
  for (double R : {0.1, 0.7, 2.0, 13.0}) {
    for (double lambda : {0.05, 0.3, 1.0, 9.0}) {
      const int k = choose_kappa(R, lambda);
      CHECK(std::ldexp(R, 2 - k) <= lambda);
      if (k > 0) CHECK(std::ldexp(R, 3 - k) > lambda);
    }
  }
  CHECK_THROWS_AS(choose_kappa(-1.0, 1.0), DomainError);
  CHECK_THROWS_AS(choose_kappa(1.0, 0.0), DomainError);
}

TEST_CASE("Dyadic arithmetic is exact") {
  const Dyadic a = Dyadic::of(3, 2), b = Dyadic::of(1, 3);
  CHECK((a + b) == Dyadic::of(7, 3));
  CHECK((a - b).value() == 0.625);
  CHECK((a * b) == Dyadic::of(3, 5));
  CHECK(Dyadic::of(4, 3) == Dyadic::of(1, 1));
  CHECK(Dyadic::from_double(0.375) == Dyadic::of(3, 3));
  CHECK_THROWS_AS(Dyadic::from_double(0.1), DomainError);
  CHECK(b < a);
  CHECK(to_string(Dyadic::of(3, 3)) == "3/8");
}

TEST_CASE("check_Ck at k = 0, K' = 0 is displacement convexity") {
  const SpacePtr flat = make_flat_space(0.0, 6.0);
  const GridMeasure mu0 = GridMeasure::from_cell_masses(flat, {0.0, 0.5, 1.5}, {0.2, 0.8});
  const GridMeasure mu1 = GridMeasure::from_cell_masses(flat, {3.0, 4.0, 5.5}, {0.5, 0.5});
  const QuantileTransport qt = w2_quantile(mu0, mu1, 8);
  const CkReport rep = check_Ck(qt.geodesic, 0.0, 0.0, -1.0, 0, small_ck());
  CHECK(rep.verdict == Verdict::kPass);
  REQUIRE(rep.pairs.size() == 1);
  for (const CkEntry& e : rep.entries) {
    const double s0 = renyi_entropy(mu0, e.Nprime), s1 = renyi_entropy(mu1, e.Nprime);
    const double sx = renyi_entropy(displacement_interpolate(qt.geodesic, e.r), e.Nprime);
    const double expected = ((1 - e.r) * s0 + e.r * s1 - sx) / sx;
    CHECK(e.slack == doctest::Approx(expected).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("check_Ck on the cos geodesic, with theta0 from the coupling") {
  const QuantileGeodesic g = cos_geodesic();
  const CkReport rep = check_Ck(g, -1.0, -1.0, -1.0, 0, small_ck());
  CHECK(rep.verdict == Verdict::kPass);
  CHECK(rep.theta0 == doctest::Approx(g.max_pair_distance()));
  CHECK(theta_zero(g, -1.0) == g.max_pair_distance());
  CHECK(theta_zero(g, 0.5) == g.min_pair_distance());

  const CkReport k2 = check_Ck(g, -1.0, -1.0, -1.0, 2, small_ck());
  CHECK(k2.verdict == Verdict::kPass);
  CHECK(k2.theta_k == doctest::Approx(rep.theta0 / 4.0));
  CHECK(k2.pairs.size() == 7);  // starts on 2^{-3} Z
}

TEST_CASE("constant geodesic: slacks are (sigma sum - 1) and shrink with theta") {
  const SpacePtr flat = make_flat_space(0.0, 2.0);
  const GridMeasure mu = GridMeasure::from_cell_masses(flat, {0.0, 1.0, 2.0}, {0.4, 0.6});
  const QuantileGeodesic g = w2_quantile(mu, mu, 2).geodesic;
  const CkReport rep = check_Ck(g, 1.0, 1.0, -1.0, 0, small_ck());
  // theta0 = 0: sigma^{(r)}(0) = r, so every slack vanishes.
  CHECK(rep.theta0 == 0.0);
  for (const CkEntry& e : rep.entries) CHECK(std::abs(e.slack) <= 1e-12);
}

TEST_CASE("recursion_step k = 1: derived and direct bounds agree") {
  const QuantileGeodesic g = cos_geodesic();
  const CkReport c1 = check_Ck(g, -1.0, -1.0, -1.0, 1, small_ck());
  REQUIRE(c1.verdict == Verdict::kPass);
  const RecursionReport rr = recursion_step(c1, g, small_ck());
  CHECK(rr.from_k == 1);
  CHECK(rr.inputs_hold);
  CHECK(rr.max_gap <= 1e-8);
  CHECK(rr.bounds_agree);
  CHECK(rr.direct.k == 0);
  CHECK(rr.verdict == Verdict::kPass);
  CHECK_THROWS(recursion_step(check_Ck(g, -1.0, -1.0, -1.0, 0, small_ck()), g, small_ck()));
}

TEST_CASE("recursion_step: the midpoint flag never fires for K' > 0") {
  const SpacePtr sinh = make_model_space("sinh_model", 1.0, -2.0);
  const GridMeasure mu0 = GridMeasure::from_cell_masses(sinh, {0.5, 1.0, 1.5}, {0.5, 0.5});
  const GridMeasure mu1 = GridMeasure::from_cell_masses(sinh, {2.0, 2.5, 3.5}, {0.3, 0.7});
  const QuantileGeodesic g = w2_quantile(mu0, mu1, 4).geodesic;
  for (int k = 1; k <= 3; ++k) {
    const CkReport ck = check_Ck(g, 1.0, 0.8, -1.0, k, small_ck());
    REQUIRE(ck.verdict == Verdict::kPass);
    const RecursionReport rr = recursion_step(ck, g, small_ck());
    CHECK(rr.flagged == 0);
    CHECK(rr.bounds_agree);
  }
}

TEST_CASE("local_cover_check: single-block cover degenerates to the direct check") {
  const SpacePtr space = make_model_space("cos_model", -1.0, -2.0);
  LocalCoverOptions o;
  o.cell_count = 1;
  o.lambda = 4.0 * 0.8;
  o.draws_per_cell = 1;
  o.ck = small_ck();
  o.cd.t_grid = {0.0, 0.5, 1.0};
  o.cd.Nprime_grid = {-1.0, -0.5};
  o.singular_margin = 0.1;
  const LocalCoverReport rep = local_cover_check(space, 0.8, 0.0, -1.0, -1.0, o);
  CHECK(rep.kappa == 0);
  CHECK(rep.chain.empty());
  REQUIRE(rep.ck_kappa);
  CHECK(rep.ck_kappa->k == 0);
  INFO(rep.reason);
  CHECK(rep.verdict == Verdict::kPass);
  for (const BlockCheck& b : rep.blocks) CHECK(b.contained);

  // lambda / 2 = 1.6 away from the singular points leaves X_0 = [-0.62, 0.62],
  // smaller than the ball the marginals are drawn from.
  o.singular_margin.reset();
  const LocalCoverReport gap = local_cover_check(space, 0.8, 0.0, -1.0, -1.0, o);
  CHECK(gap.verdict == Verdict::kInconclusive);
  CHECK(!gap.witness);
}

TEST_CASE("local_cover_check: inflated K fails with a witness") {
  const SpacePtr space = make_model_space("cos_model", -1.0, -2.0);
  LocalCoverOptions o;
  o.cell_count = 2;
  o.draws_per_cell = 1;
  o.ck = small_ck();
  o.cd.t_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  o.cd.Nprime_grid = {-1.0, -0.5};
  const LocalCoverReport rep = local_cover_check(space, 1.11, 0.0, 5.0, -1.0, o);
  CHECK(rep.verdict == Verdict::kFail);
  REQUIRE(rep.witness);
  CHECK(rep.witness->margin < 0.0);
  CHECK(rep.witness->t > 0.0);
  CHECK(rep.witness->t < 1.0);
  CHECK(rep.witness->Nprime < 0.0);
}

TEST_CASE("local_cover_check: 2R box reaching the singular points") {
  const SpacePtr space = make_model_space("cos_model", -1.0, -2.0);
  LocalCoverOptions o;
  o.cell_count = 2;
  o.draws_per_cell = 1;
  o.kappa_override = 0;
  o.ck = small_ck();
  o.cd.t_grid = {0.0, 0.5, 1.0};
  o.cd.Nprime_grid = {-1.0, -0.5};
  const double R = 0.5 * space->hi();
  LocalCoverReport rep;
  CHECK_NOTHROW(rep = local_cover_check(space, R, 0.0, -1.0, -1.0, o));
  CHECK(rep.verdict != Verdict::kFail);
}
