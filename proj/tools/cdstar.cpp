// cdstar: command-line front end.
//
// Exit status: 0 success / PASS, 1 FAIL or INCONCLUSIVE, 2 usage or input errors.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdstar/cdcheck.hpp"
#include "cdstar/coefficients.hpp"
#include "cdstar/errors.hpp"
#include "cdstar/io.hpp"
#include "cdstar/localglobal.hpp"
#include "cdstar/selftest.hpp"
#include "cdstar/transport.hpp"

namespace fs = std::filesystem;
using cdstar::io::Json;

namespace {

constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Output {
  std::string path;    // empty: stdout
  std::string format;  // json | csv | "" (command default)
  std::string csv;     // extra table destination (file or directory, per command)

  void write(const std::string& text) const {
    if (path.empty()) {
      std::cout << text;
      std::cout.flush();
      return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path);
    out << text;
  }
  bool wants_csv(bool default_csv = false) const { return format.empty() ? default_csv : format == "csv"; }
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
}

int verdict_exit(cdstar::Verdict v) { return v == cdstar::Verdict::kPass ? 0 : kExitFail; }

cdstar::SpacePtr load_space(const std::string& path) {
  const Json j = cdstar::io::read_json_file(path);
  return std::make_shared<const cdstar::WeightedInterval>(cdstar::io::space_from_json(j, path));
}

bool is_finite_space_json(const Json& j) { return j.is_object() && (j.contains("coords") || j.contains("distances")); }

// A measure file and the space it lives on: --space when given, otherwise the
// file's space_ref.
struct LoadedMeasure {
  Json json;
  std::string path;
  std::optional<cdstar::GridMeasure> grid;
  std::optional<cdstar::DiscreteMeasure> discrete;
};

LoadedMeasure load_measure(const std::string& path, const std::string& space_path) {
  LoadedMeasure m;
  m.path = path;
  m.json = cdstar::io::read_json_file(path);
  const bool discrete = m.json.is_object() && m.json.contains("masses");
  if (discrete) {
    if (space_path.empty()) throw cdstar::io::ParseError(path, 0, 0, "discrete measures need --space");
    const Json sj = cdstar::io::read_json_file(space_path);
    if (!is_finite_space_json(sj)) throw cdstar::io::ParseError(space_path, 0, 0, "expected a finite space");
    const auto fs = std::make_shared<const cdstar::FiniteMetricSpace>(cdstar::io::finite_space_from_json(sj, space_path));
    m.discrete = cdstar::io::discrete_measure_from_json(m.json, fs, path);
    return m;
  }
  cdstar::SpacePtr space;
  std::string ref;
  if (m.json.is_object() && m.json.contains("space_ref") && m.json["space_ref"].is_string()) {
    ref = m.json["space_ref"].get<std::string>();
  }
  if (!space_path.empty()) {
    space = load_space(space_path);
    if (!ref.empty() && ref != space->name() && ref != cdstar::io::space_ref_of(*space)) {
      const auto resolved = cdstar::io::resolve_space_ref(ref, fs::path(path).parent_path());
      if (!resolved || !(*resolved == *space)) {
        throw cdstar::io::ParseError(path, 0, 0, "space_ref '" + ref + "' does not match --space " + space_path);
      }
    }
  } else {
    const auto resolved = cdstar::io::resolve_space_ref(ref, fs::path(path).parent_path());
    if (!resolved) throw cdstar::io::ParseError(path, 0, 0, "cannot resolve space_ref '" + ref + "'; pass --space");
    space = std::make_shared<const cdstar::WeightedInterval>(*resolved);
  }
  m.grid = cdstar::io::grid_measure_from_json(m.json, space, path);
  return m;
}

Json envelope(const std::string& command, Json inputs, Json tolerances, Json report) {
  Json j;
  j["command"] = command;
  j["inputs"] = std::move(inputs);
  j["tolerances"] = std::move(tolerances);
  j["report"] = std::move(report);
  return j;
}

Json cd_tolerances(const cdstar::CdCheckOptions& o) {
  return {{"base_subdivisions", o.base_subdivisions},
          {"levels", o.levels},
          {"roundoff_floor", o.roundoff_floor},
          {"pass_rule", "worst_margin >= -discretization_note"}};
}

double default_model_k(const std::string& name) {
  if (name == "cos_model") return -1.0;
  if (name == "power_model") return 0.0;
  return 1.0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical checks of reduced curvature-dimension conditions with negative dimension"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: CDSTAR_THREADS or hardware)");

  Output out;
  auto add_output = [&](CLI::App* sub, bool with_csv, const std::string& csv_help, bool short_flag = true) {
    sub->add_option(short_flag ? "-o,--output" : "--output", out.path, "Write the main output here instead of stdout");
    sub->add_option("--format", out.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    if (with_csv) sub->add_option("--csv", out.csv, csv_help);
  };

  // sigma
  double K = 0.0, N = -1.0, t = 0.0, theta = 0.0;
  auto* sigma_cmd = app.add_subcommand("sigma", "Distortion coefficient sigma_{K,N}^{(t)}(theta)");
  sigma_cmd->add_option("--K", K)->required();
  sigma_cmd->add_option("--N", N)->required();
  sigma_cmd->add_option("--t", t)->required();
  sigma_cmd->add_option("--theta", theta)->required();

  // entropy
  std::string measure_path, space_path;
  double Nprime = -1.0;
  auto* entropy_cmd = app.add_subcommand("entropy", "Renyi entropy S_{N'}(mu)");
  entropy_cmd->add_option("--measure", measure_path)->required()->check(CLI::ExistingFile);
  entropy_cmd->add_option("--Nprime", Nprime)->required();
  entropy_cmd->add_option("--space", space_path, "Space file (default: the measure's space_ref)");
  add_output(entropy_cmd, false, "");

  // transport
  std::string mu0_path, mu1_path;
  std::optional<double> t_opt;
  bool oracle = false;
  std::size_t subdivisions = 2;
  auto* transport_cmd = app.add_subcommand("transport", "Quadratic optimal transport between two measures");
  transport_cmd->add_option("--mu0", mu0_path)->required()->check(CLI::ExistingFile);
  transport_cmd->add_option("--mu1", mu1_path)->required()->check(CLI::ExistingFile);
  transport_cmd->add_option("--t", t_opt, "Also emit the displacement interpolant at time t");
  transport_cmd->add_flag("--oracle", oracle, "Solve the LP on the atomized measures and print the coupling as CSV");
  transport_cmd->add_option("--space", space_path);
  transport_cmd->add_option("--subdivisions", subdivisions, "Quantile segments per cell")->check(CLI::PositiveNumber);
  add_output(transport_cmd, true, "File for the coupling CSV (with --oracle)");

  // cd-check
  cdstar::CdCheckOptions cd;
  bool minus = false;
  std::vector<double> kgrid;
  auto* cd_cmd = app.add_subcommand("cd-check", "CD*(K,N) inequality along the geodesic from mu0 to mu1");
  cd_cmd->add_option("--space", space_path)->required()->check(CLI::ExistingFile);
  cd_cmd->add_option("--mu0", mu0_path)->required()->check(CLI::ExistingFile);
  cd_cmd->add_option("--mu1", mu1_path)->required()->check(CLI::ExistingFile);
  cd_cmd->add_option("--K", K)->required();
  cd_cmd->add_option("--N", N)->required();
  cd_cmd->add_flag("--minus", minus, "Check CD*(K-,N) on --Kgrid");
  cd_cmd->add_option("--Kgrid", kgrid, "K' values below K (comma separated); default K-0.5, K-0.25, K-0.1")
      ->delimiter(',');
  cd_cmd->add_option("--t-grid", cd.t_grid, "Times (default k/16)")->delimiter(',');
  cd_cmd->add_option("--nprime-grid", cd.Nprime_grid, "N' values (default 8 log-spaced in [N, -1e-3])")->delimiter(',');
  cd_cmd->add_option("--subdivisions", cd.base_subdivisions, "Coarsest quantile segments per cell")
      ->check(CLI::PositiveNumber);
  cd_cmd->add_option("--levels", cd.levels, "Grid resolutions compared")->check(CLI::Range(2, 6));
  cd_cmd->add_option("--roundoff-floor", cd.roundoff_floor);
  add_output(cd_cmd, true, "File for the margin table (t, Nprime, S, R, margin)");

  // local-global
  double R = 1.0, o = 0.0;
  cdstar::LocalCoverOptions lg;
  std::uint64_t seed = 42;
  std::optional<int> kappa_override;
  std::optional<double> lambda;
  std::string lg_mu0, lg_mu1;
  auto* lg_cmd = app.add_subcommand("local-global", "Local CD* on a cover, C(kappa) and the recursion to C(0)");
  lg_cmd->add_option("--space", space_path)->required()->check(CLI::ExistingFile);
  lg_cmd->add_option("--R", R)->required();
  lg_cmd->add_option("--o", o)->required();
  lg_cmd->add_option("--K", K)->required();
  lg_cmd->add_option("--N", N)->required();
  lg_cmd->add_option("--kappa-override", kappa_override);
  lg_cmd->add_option("--lambda", lambda, "Cover fattening (default: domain length / 10)");
  lg_cmd->add_option("--cells", lg.cell_count, "Cover cells before splitting at singular points")
      ->check(CLI::PositiveNumber);
  lg_cmd->add_option("--draws", lg.draws_per_cell, "Local marginal pairs per cell");
  lg_cmd->add_option("--kprime-offset", lg.kprime_offset, "K' = K - offset for C(k)")->check(CLI::PositiveNumber);
  lg_cmd->add_option("--mu0", lg_mu0, "Global marginal (default: sampled in B_R(o))")->check(CLI::ExistingFile);
  lg_cmd->add_option("--mu1", lg_mu1)->check(CLI::ExistingFile);
  lg_cmd->add_option("--roundoff-floor", lg.ck.roundoff_floor);
  lg_cmd->add_option("--seed", seed, "Sampling seed");
  // --o is the centre, so no -o here
  add_output(lg_cmd, true, "Directory for the slack tables (ck.csv, recursion_k*.csv, blocks.csv, assembly.csv)", false);

  // models
  auto* models_cmd = app.add_subcommand("models", "Catalog of model spaces");
  models_cmd->require_subcommand(1);
  models_cmd->add_subcommand("list", "Names of the model spaces");
  std::string model_name;
  std::optional<double> model_K;
  double model_N = -2.0;
  auto* describe_cmd = models_cmd->add_subcommand("describe", "Space JSON of one model");
  describe_cmd->add_option("name", model_name)->required();
  describe_cmd->add_option("--K", model_K, "Curvature (default -1, 0, 1 for cos, power, sinh)");
  describe_cmd->add_option("--N", model_N, "Dimension parameter, N < -1");

  // selftest
  auto* selftest_cmd = app.add_subcommand("selftest", "Sampled invariant suite; deterministic for a fixed seed");
  selftest_cmd->add_option("--seed", seed, "Sampling seed");
  selftest_cmd->add_option("-o,--output", out.path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (threads > 0) {
    const std::string value = std::to_string(threads);
    ::setenv("CDSTAR_THREADS", value.c_str(), 1);
  }

  try {
    if (*sigma_cmd) {
      std::cout << cdstar::io::format_double(cdstar::sigma(K, N, t, theta).to_double()) << "\n";
      return 0;
    }

    if (*entropy_cmd) {
      const LoadedMeasure m = load_measure(measure_path, space_path);
      Json r;
      r["Nprime"] = Nprime;
      if (m.grid) {
        r["entropy"] = cdstar::io::number(cdstar::renyi_entropy(*m.grid, Nprime));
        r["log_entropy"] = cdstar::io::number(cdstar::log_renyi_entropy(*m.grid, Nprime));
        r["jensen_bound"] = cdstar::io::number(std::pow(m.grid->support_mass(), 1.0 / Nprime));
      } else {
        r["entropy"] = cdstar::io::number(cdstar::renyi_entropy(*m.discrete, Nprime));
        r["log_entropy"] = cdstar::io::number(cdstar::log_renyi_entropy(*m.discrete, Nprime));
        r["jensen_bound"] = cdstar::io::number(std::pow(m.discrete->support_mass(), 1.0 / Nprime));
      }
      if (out.wants_csv()) {
        out.write("Nprime,entropy\n" + cdstar::io::format_double(Nprime) + "," +
                  (r["entropy"].is_string() ? r["entropy"].get<std::string>()
                                            : cdstar::io::format_double(r["entropy"].get<double>())) +
                  "\n");
      } else {
        out.write(cdstar::io::dump(envelope("entropy", {{"measure", measure_path}}, Json::object(), r)));
      }
      return 0;
    }

    if (*transport_cmd) {
      const LoadedMeasure a = load_measure(mu0_path, space_path);
      const LoadedMeasure b = load_measure(mu1_path, space_path);
      Json r;
      if (oracle || a.discrete || b.discrete) {
        if (t_opt) throw UsageError("--t needs grid measures and the quantile path");
        const cdstar::DiscreteMeasure da = a.discrete ? *a.discrete : cdstar::atomize(*a.grid);
        const cdstar::DiscreteMeasure db = b.discrete ? *b.discrete : cdstar::atomize(*b.grid);
        const cdstar::LpTransport lp = cdstar::w2_lp_oracle(da, db);
        const std::string table = cdstar::io::coupling_csv(lp.coupling);
        if (!out.csv.empty()) write_file(out.csv, table);
        if (out.wants_csv(oracle)) {
          out.write(table);
        } else {
          r["method"] = "lp";
          r["cost"] = lp.cost;
          r["w2"] = std::sqrt(lp.cost);
          r["unique"] = lp.unique;
          if (lp.enumeration_cost) r["enumeration_cost"] = *lp.enumeration_cost;
          out.write(cdstar::io::dump(envelope("transport", {{"mu0", mu0_path}, {"mu1", mu1_path}}, Json::object(), r)));
        }
        std::cerr << "cost " << cdstar::io::format_double(lp.cost) << "\n";
        return 0;
      }
      const cdstar::QuantileTransport qt = cdstar::w2_quantile(*a.grid, *b.grid, subdivisions);
      r["method"] = "quantile";
      r["cost"] = qt.cost;
      r["w2"] = std::sqrt(qt.cost);
      if (t_opt) {
        r["t"] = *t_opt;
        r["interpolant"] = cdstar::io::measure_to_json(cdstar::displacement_interpolate(qt.geodesic, *t_opt),
                                                       cdstar::io::space_ref_of(*a.grid->space()));
      }
      if (out.wants_csv()) {
        out.write("cost\n" + cdstar::io::format_double(qt.cost) + "\n");
      } else {
        out.write(cdstar::io::dump(envelope("transport", {{"mu0", mu0_path}, {"mu1", mu1_path}},
                                            {{"subdivisions", subdivisions}}, r)));
      }
      return 0;
    }

    if (*cd_cmd) {
      const LoadedMeasure a = load_measure(mu0_path, space_path);
      const LoadedMeasure b = load_measure(mu1_path, space_path);
      if (!a.grid || !b.grid) throw UsageError("cd-check needs grid measures");
      const Json inputs{{"space", space_path}, {"mu0", mu0_path}, {"mu1", mu1_path}, {"K", K}, {"N", N}};
      if (minus) {
        if (kgrid.empty()) kgrid = {K - 0.5, K - 0.25, K - 0.1};
        const cdstar::CdMinusReport rep = cdstar::cd_star_minus_check(*a.grid, *b.grid, K, N, kgrid, cd);
        std::string table;
        for (const cdstar::CdVerdict& v : rep.per_kprime) {
          const std::string part = cdstar::io::margins_csv(v);
          // one table, K' as a leading column
          std::istringstream lines(part);
          std::string line;
          bool header = true;
          while (std::getline(lines, line)) {
            if (header) {
              if (table.empty()) table += "Kprime," + line + "\n";
              header = false;
              continue;
            }
            table += cdstar::io::format_double(v.K) + "," + line + "\n";
          }
        }
        if (!out.csv.empty()) write_file(out.csv, table);
        if (out.wants_csv()) {
          out.write(table);
        } else {
          out.write(cdstar::io::dump(envelope("cd-check", inputs, cd_tolerances(cd), cdstar::io::to_json(rep))));
        }
        return verdict_exit(rep.verdict);
      }
      const cdstar::CdVerdict v = cdstar::cd_star_check(*a.grid, *b.grid, K, N, cd);
      if (!out.csv.empty()) write_file(out.csv, cdstar::io::margins_csv(v));
      if (out.wants_csv()) {
        out.write(cdstar::io::margins_csv(v));
      } else {
        out.write(cdstar::io::dump(envelope("cd-check", inputs, cd_tolerances(cd), cdstar::io::to_json(v))));
      }
      return verdict_exit(v.verdict);
    }

    if (*lg_cmd) {
      const cdstar::SpacePtr space = load_space(space_path);
      lg.seed = seed;
      lg.kappa_override = kappa_override;
      lg.lambda = lambda;
      if (lg_mu0.empty() != lg_mu1.empty()) throw UsageError("--mu0 and --mu1 go together");
      if (!lg_mu0.empty()) {
        const LoadedMeasure a = load_measure(lg_mu0, space_path);
        const LoadedMeasure b = load_measure(lg_mu1, space_path);
        if (!a.grid || !b.grid) throw UsageError("local-global needs grid measures");
        lg.marginals = std::make_pair(*a.grid, *b.grid);
      }
      const cdstar::LocalCoverReport rep = cdstar::local_cover_check(space, R, o, K, N, lg);
      if (!out.csv.empty()) {
        const fs::path dir(out.csv);
        fs::create_directories(dir);
        if (rep.ck_kappa) write_file(dir / "ck.csv", cdstar::io::ck_csv(*rep.ck_kappa));
        for (const cdstar::RecursionReport& rr : rep.chain) {
          write_file(dir / ("recursion_k" + std::to_string(rr.from_k) + ".csv"), cdstar::io::recursion_csv(rr));
        }
        write_file(dir / "blocks.csv", cdstar::io::blocks_csv(rep));
        write_file(dir / "assembly.csv", cdstar::io::assembly_csv(rep));
      }
      if (out.wants_csv()) {
        out.write(rep.ck_kappa ? cdstar::io::ck_csv(*rep.ck_kappa) : std::string());
      } else {
        const Json inputs{{"space", space_path}, {"R", R}, {"o", o}, {"K", K}, {"N", N}, {"seed", seed},
                          {"mu0", lg_mu0.empty() ? Json() : Json(lg_mu0)},
                          {"mu1", lg_mu1.empty() ? Json() : Json(lg_mu1)}};
        const Json tolerances{{"cells", lg.cell_count},
                              {"kprime_offset", lg.kprime_offset},
                              {"draws_per_cell", lg.draws_per_cell},
                              {"subdivisions", lg.subdivisions},
                              {"roundoff_floor", lg.ck.roundoff_floor},
                              {"recursion_gap", 1e-8},
                              {"local", cd_tolerances(lg.cd)}};
        out.write(cdstar::io::dump(envelope("local-global", inputs, tolerances, cdstar::io::to_json(rep))));
      }
      return verdict_exit(rep.verdict);
    }

    if (*models_cmd) {
      if (models_cmd->got_subcommand("list")) {
        Json list = Json::array();
        for (const std::string& name : cdstar::model_space_names()) list.push_back(name);
        std::cout << cdstar::io::dump(list);
        return 0;
      }
      const double k = model_K ? *model_K : default_model_k(model_name);
      std::cout << cdstar::io::dump(cdstar::io::space_to_json(cdstar::model_space(model_name, k, model_N)));
      return 0;
    }

    if (*selftest_cmd) {
      const cdstar::SelftestReport rep = cdstar::run_selftest(seed);
      out.write(cdstar::io::dump(cdstar::to_json(rep)));
      return rep.passed ? 0 : kExitFail;
    }
  } catch (const cdstar::io::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cdstar::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cdstar::NotFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
