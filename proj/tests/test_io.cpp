#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cdstar/io.hpp"
#include "cdstar/sampling.hpp"
#include "doctest.h"

using namespace cdstar;
using io::Json;

TEST_CASE("model spaces round-trip through JSON") {
  for (const auto& [name, K] : std::vector<std::pair<std::string, double>>{
           {"sinh_model", 1.5}, {"power_model", 0.0}, {"cos_model", -1.0}}) {
    const WeightedInterval s = model_space(name, K, -2.5);
    const Json j = io::space_to_json(s);
    CHECK(io::space_from_json(io::parse_json(io::dump(j))) == s);
  }
  const Json short_form = io::parse_json(R"({"model": "cos_model", "K": -1, "N": -2})");
  CHECK(io::space_from_json(short_form) == model_space("cos_model", -1.0, -2.0));
}

TEST_CASE("custom piecewise-constant space") {
  const Json j = io::parse_json(R"({
    "name": "steps", "domain": [0, 2],
    "weight": {"kind": "piecewise_constant", "params": {"breaks": [0, 1, 2], "values": [1, 3]}},
    "singular_set": [], "claimed_condition": "none"})");
  const WeightedInterval s = io::space_from_json(j);
  CHECK(s.reference_mass(0.0, 2.0).value() == doctest::Approx(4.0));
  CHECK(io::space_from_json(io::space_to_json(s)) == s);
  CHECK(io::space_ref_of(s) == "steps");
}

TEST_CASE("grid and discrete measures round-trip") {
  const SpacePtr space = make_model_space("cos_model", -1.0, -2.0);
  Rng rng(61);
  const auto [lo, hi] = regular_window(*space, 0.2);
  for (int rep = 0; rep < 20; ++rep) {
    const GridMeasure mu = random_grid_measure(space, lo, hi, rng);
    const Json j = io::measure_to_json(mu, io::space_ref_of(*space));
    CHECK(j["space_ref"] == "cos_model(-1, -2)");
    const GridMeasure back = io::grid_measure_from_json(io::parse_json(io::dump(j)), space);
    CHECK(back.breaks() == mu.breaks());
    CHECK(back.density() == mu.density());
  }
  const Json probs = io::parse_json(R"({"space_ref": "x", "breakpoints": [-1.2, -0.8, -0.3], "probabilities": [0.6, 0.4]})");
  const GridMeasure p = io::grid_measure_from_json(probs, space);
  CHECK(p.probability(0) == doctest::Approx(0.6));

  const FiniteMetricSpace fs = FiniteMetricSpace::on_line({0.0, 1.5, 4.0}, {ExtendedReal(1.0), ExtendedReal::infinity(), ExtendedReal(2.0)});
  const FiniteMetricSpace fs_back = io::finite_space_from_json(io::parse_json(io::dump(io::finite_space_to_json(fs))));
  CHECK(fs_back == fs);
  const FiniteMetricSpace dm({"a", "b"}, {0, 2, 2, 0}, {ExtendedReal(1.0), ExtendedReal(1.0)});
  CHECK(io::finite_space_from_json(io::finite_space_to_json(dm)) == dm);
  const auto fsp = std::make_shared<const FiniteMetricSpace>(fs);
  const DiscreteMeasure d(fsp, {0.25, 0.0, 0.75});
  CHECK(io::discrete_measure_from_json(io::measure_to_json(d, "finite"), fsp) == d);
}

TEST_CASE("numbers: non-finite values are strings") {
  CHECK(io::number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(io::number(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(io::number(ExtendedReal::infinity()) == "inf");
  CHECK(io::number(0.5) == 0.5);
  CHECK(std::isinf(io::to_double(Json("inf"), "x")));
  CHECK(io::to_double(Json(2), "x") == 2.0);
  CHECK_THROWS_AS(io::to_double(Json("abc"), "x"), std::invalid_argument);
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(1e300) == "1e+300");
}

TEST_CASE("parse errors carry line and column") {
  try {
    io::parse_json("{\n  \"a\": 1,\n  \"b\": ]\n}", "f.json");
    FAIL("no exception");
  } catch (const io::ParseError& e) {
    CHECK(e.source() == "f.json");
    CHECK(e.line() == 3);
    CHECK(e.column() == 8);
    CHECK(std::string(e.what()).rfind("f.json:3:8:", 0) == 0);
  }
  CHECK_THROWS_AS(io::space_from_json(io::parse_json(R"({"model": "cos_model", "K": 1, "N": -2})")), io::ParseError);
  CHECK_THROWS_AS(io::space_from_json(io::parse_json(R"({"name": "x"})")), io::ParseError);
  CHECK_THROWS_AS(io::read_json_file("/nonexistent/file.json"), io::ParseError);
}

TEST_CASE("space references") {
  const auto dir = std::filesystem::temp_directory_path() / "cdstar_io_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "space.json") << R"({"model": "power_model", "K": 0, "N": -2})";
  }
  CHECK(io::resolve_space_ref("cos_model(-1, -2)", dir) == model_space("cos_model", -1.0, -2.0));
  CHECK(io::resolve_space_ref("space.json", dir) == model_space("power_model", 0.0, -2.0));
  CHECK_FALSE(io::resolve_space_ref("missing.json", dir));
  CHECK_THROWS_AS(io::resolve_space_ref("cos_model(1, -2)", dir), io::ParseError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reports serialize") {
  const SpacePtr space = make_model_space("cos_model", -1.0, -2.0);
  const GridMeasure mu0 = GridMeasure::from_cell_masses(space, {-1.2, -0.8, -0.3}, {0.6, 0.4});
  const GridMeasure mu1 = GridMeasure::from_cell_masses(space, {0.2, 0.7, 1.3}, {0.3, 0.7});
  CdCheckOptions o;
  o.t_grid = {0.0, 0.5, 1.0};
  o.Nprime_grid = {-1.0, -0.5};
  o.levels = 2;
  const CdVerdict v = cd_star_check(mu0, mu1, -1.0, -1.0, o);
  const Json j = io::to_json(v);
  CHECK(j["verdict"] == "PASS");
  CHECK(j["margins"].size() == 6);
  const std::string csv = io::margins_csv(v);
  CHECK(csv.rfind("t,Nprime,S,R,margin\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}
