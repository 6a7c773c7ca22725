#include "cdstar/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>

#include "cdstar/errors.hpp"

namespace cdstar::io {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string where(const std::string& source, std::size_t line, std::size_t column) {
  if (line == 0) return source;
  return source + ":" + std::to_string(line) + ":" + std::to_string(column);
}

[[noreturn]] void fail(const std::string& source, const std::string& message) {
  throw ParseError(source, 0, 0, message);
}

const Json& field(const Json& j, const char* key, const std::string& source) {
  if (!j.is_object()) fail(source, "expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) fail(source, std::string("missing field '") + key + "'");
  return *it;
}

std::vector<double> numbers(const Json& j, const std::string& what, const std::string& source) {
  if (!j.is_array()) fail(source, what + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& x : j) out.push_back(to_double(x, what));
  return out;
}

std::string text(const Json& j, const std::string& what, const std::string& source) {
  if (!j.is_string()) fail(source, what + " must be a string");
  return j.get<std::string>();
}

Json array(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

Json strings(const std::vector<std::string>& v) {
  Json out = Json::array();
  for (const auto& s : v) out.push_back(s);
  return out;
}

std::string csv_bool(bool b) { return b ? "true" : "false"; }

template <class F>
auto semantic(const std::string& source, F&& build) {
  try {
    return build();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    fail(source, e.what());
  }
}

}  // namespace

ParseError::ParseError(std::string source, std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error(where(source, line, column) + ": " + message),
      source_(std::move(source)),
      line_(line),
      column_(column) {}

Json parse_json(std::string_view input, const std::string& source) {
  try {
    return Json::parse(input.begin(), input.end());
  } catch (const Json::parse_error& e) {
    // e.byte is 1-based and points at the offending character.
    const std::size_t offset = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, input.size());
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (input[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string message = e.what();
    if (auto pos = message.find(": syntax error"); pos != std::string::npos) message = message.substr(pos + 2);
    throw ParseError(source, line, column, message);
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_json(buffer.str(), path.string());
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

Json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

Json number(const ExtendedReal& x) { return number(x.to_double()); }

double to_double(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw std::invalid_argument(what + " must be a number or \"inf\"/\"-inf\"");
}

Json space_to_json(const WeightedInterval& space) {
  const Weight& w = space.weight();
  Json params = Json::object();
  switch (w.kind()) {
    case WeightKind::kSinh:
    case WeightKind::kCos:
      params["K"] = w.K();
      params["N"] = w.N();
      break;
    case WeightKind::kPower:
      params["N"] = w.N();
      break;
    case WeightKind::kPiecewiseConstant:
      params["breaks"] = array(w.breaks());
      params["values"] = array(w.values());
      break;
  }
  Json j;
  j["name"] = space.name();
  j["domain"] = Json::array({number(space.lo()), number(space.hi())});
  j["weight"] = {{"kind", std::string(to_string(w.kind()))}, {"params", params}};
  j["singular_set"] = array(space.singular_set());
  j["claimed_condition"] = space.claimed_condition();
  return j;
}

WeightedInterval space_from_json(const Json& j, const std::string& source) {
  if (!j.is_object()) fail(source, "space must be a JSON object");
  return semantic(source, [&] {
    if (j.contains("model")) {
      const std::string name = text(j["model"], "model", source);
      return model_space(name, to_double(field(j, "K", source), "K"), to_double(field(j, "N", source), "N"));
    }
    const std::string name = text(field(j, "name", source), "name", source);
    const std::vector<double> domain = numbers(field(j, "domain", source), "domain", source);
    if (domain.size() != 2) fail(source, "domain must have two entries");
    const Json& wj = field(j, "weight", source);
    const std::string kind = text(field(wj, "kind", source), "weight.kind", source);
    const Json& params = field(wj, "params", source);
    auto param = [&](const char* key) { return to_double(field(params, key, source), std::string("weight.params.") + key); };
    Weight weight = [&] {
      switch (weight_kind_from_string(kind)) {
        case WeightKind::kSinh: return Weight::sinh_profile(param("K"), param("N"));
        case WeightKind::kCos: return Weight::cos_profile(param("K"), param("N"));
        case WeightKind::kPower: return Weight::power_profile(param("N"));
        case WeightKind::kPiecewiseConstant:
          break;
      }
      return Weight::piecewise_constant(numbers(field(params, "breaks", source), "weight.params.breaks", source),
                                        numbers(field(params, "values", source), "weight.params.values", source));
    }();
    std::vector<double> singular;
    if (j.contains("singular_set")) singular = numbers(j["singular_set"], "singular_set", source);
    std::string claim;
    if (j.contains("claimed_condition")) claim = text(j["claimed_condition"], "claimed_condition", source);
    return WeightedInterval(name, domain[0], domain[1], std::move(weight), std::move(singular), std::move(claim));
  });
}

Json finite_space_to_json(const FiniteMetricSpace& space) {
  Json j;
  j["name"] = "finite";
  j["labels"] = strings(space.labels());
  if (space.coords()) {
    j["coords"] = array(*space.coords());
  } else {
    Json rows = Json::array();
    for (std::size_t i = 0; i < space.size(); ++i) {
      Json row = Json::array();
      for (std::size_t k = 0; k < space.size(); ++k) row.push_back(space.distance(i, k));
      rows.push_back(std::move(row));
    }
    j["distances"] = std::move(rows);
  }
  Json weights = Json::array();
  for (const ExtendedReal& w : space.weights()) weights.push_back(number(w));
  j["weights"] = std::move(weights);
  return j;
}

FiniteMetricSpace finite_space_from_json(const Json& j, const std::string& source) {
  if (!j.is_object()) fail(source, "space must be a JSON object");
  return semantic(source, [&] {
    std::vector<ExtendedReal> weights;
    for (double w : numbers(field(j, "weights", source), "weights", source)) {
      weights.push_back(std::isinf(w) && w > 0 ? ExtendedReal::infinity() : ExtendedReal(w));
    }
    // Labels of a line space are derived from the coordinates.
    if (j.contains("coords")) return FiniteMetricSpace::on_line(numbers(j["coords"], "coords", source), weights);
    std::vector<std::string> labels;
    const Json& lj = field(j, "labels", source);
    if (!lj.is_array()) fail(source, "labels must be an array");
    for (const Json& l : lj) labels.push_back(text(l, "label", source));
    std::vector<double> dist;
    const Json& dj = field(j, "distances", source);
    if (!dj.is_array()) fail(source, "distances must be an array of rows");
    for (const Json& row : dj) {
      const std::vector<double> r = numbers(row, "distance row", source);
      dist.insert(dist.end(), r.begin(), r.end());
    }
    return FiniteMetricSpace(std::move(labels), std::move(dist), std::move(weights));
  });
}

std::string space_ref_of(const WeightedInterval& space) {
  const auto& models = model_space_names();
  if (std::find(models.begin(), models.end(), space.name()) == models.end()) return space.name();
  const Weight& w = space.weight();
  const double K = w.kind() == WeightKind::kPower ? 0.0 : w.K();
  return space.name() + "(" + format_double(K) + ", " + format_double(w.N()) + ")";
}

std::optional<WeightedInterval> resolve_space_ref(const std::string& ref, const std::filesystem::path& base_dir) {
  static const std::regex model(R"(^\s*([A-Za-z_]+)\s*\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)\s*$)");
  std::smatch m;
  if (std::regex_match(ref, m, model)) {
    try {
      return model_space(m[1].str(), std::stod(m[2].str()), std::stod(m[3].str()));
    } catch (const std::exception& e) {
      fail(ref, e.what());
    }
  }
  const std::filesystem::path path = base_dir / ref;
  std::error_code ec;
  if (!ref.empty() && std::filesystem::is_regular_file(path, ec)) return space_from_json(read_json_file(path), path.string());
  return std::nullopt;
}

Json measure_to_json(const GridMeasure& mu, const std::string& space_ref) {
  Json j;
  j["space_ref"] = space_ref;
  j["breakpoints"] = array(mu.breaks());
  j["density"] = array(mu.density());
  return j;
}

GridMeasure grid_measure_from_json(const Json& j, const SpacePtr& space, const std::string& source) {
  if (!j.is_object()) fail(source, "measure must be a JSON object");
  return semantic(source, [&] {
    std::vector<double> breaks = numbers(field(j, "breakpoints", source), "breakpoints", source);
    if (j.contains("density")) return GridMeasure(space, std::move(breaks), numbers(j["density"], "density", source));
    if (j.contains("probabilities")) {
      return GridMeasure::from_cell_masses(space, std::move(breaks), numbers(j["probabilities"], "probabilities", source));
    }
    fail(source, "missing field 'density'");
  });
}

Json measure_to_json(const DiscreteMeasure& mu, const std::string& space_ref) {
  Json j;
  j["space_ref"] = space_ref;
  j["masses"] = array(mu.masses());
  return j;
}

DiscreteMeasure discrete_measure_from_json(const Json& j, const FiniteSpacePtr& space, const std::string& source) {
  if (!j.is_object()) fail(source, "measure must be a JSON object");
  return semantic(source, [&] { return DiscreteMeasure(space, numbers(field(j, "masses", source), "masses", source)); });
}

Json to_json(const MarginEntry& e) {
  Json j;
  j["t"] = e.t;
  j["Nprime"] = e.Nprime;
  j["S"] = number(e.S);
  j["log_S"] = number(e.log_S);
  j["R"] = number(e.R);
  j["log_R"] = number(e.log_R);
  j["margin"] = number(e.margin);
  j["vacuous"] = e.vacuous;
  return j;
}

Json to_json(const CdVerdict& v, bool with_margins) {
  Json j;
  j["verdict"] = std::string(to_string(v.verdict));
  j["K"] = v.K;
  j["N"] = v.N;
  j["worst_margin"] = number(v.worst_margin);
  j["discretization_note"] = number(v.discretization_note);
  j["level_notes"] = array(v.level_notes);
  j["note_ratio"] = number(v.note_ratio);
  j["witness"] = v.witness ? to_json(*v.witness) : Json();
  if (!v.reason.empty()) j["reason"] = v.reason;
  j["remarks"] = strings(v.remarks);
  j["t_grid"] = array(v.t_grid);
  j["Nprime_grid"] = array(v.Nprime_grid);
  if (with_margins) {
    Json m = Json::array();
    for (const MarginEntry& e : v.margins) m.push_back(to_json(e));
    j["margins"] = std::move(m);
  }
  return j;
}

Json to_json(const CdMinusReport& r) {
  Json j;
  j["verdict"] = std::string(to_string(r.verdict));
  j["K"] = r.K;
  j["N"] = r.N;
  j["Kprime_grid"] = array(r.Kprime_grid);
  j["monotone_in_kprime"] = r.monotone_in_kprime;
  j["limit_agrees"] = r.limit_agrees;
  Json per = Json::array();
  for (const CdVerdict& v : r.per_kprime) per.push_back(to_json(v, false));
  j["per_kprime"] = std::move(per);
  j["limit"] = r.limit ? to_json(*r.limit, false) : Json();
  return j;
}

Json to_json(const EquivalentFormReport& r) {
  Json j;
  j["theta"] = number(r.theta);
  j["implication_holds"] = r.implication_holds;
  j["convt"] = to_json(r.convt, false);
  j["cd"] = to_json(r.cd, false);
  return j;
}

Json to_json(const CkEntry& e) {
  Json j;
  j["s"] = to_string(e.s);
  j["t"] = to_string(e.t);
  j["r"] = e.r;
  j["Nprime"] = e.Nprime;
  j["log_S_s"] = number(e.log_S_s);
  j["log_S_x"] = number(e.log_S_x);
  j["log_S_t"] = number(e.log_S_t);
  j["sigma_lo"] = number(e.sigma_lo);
  j["sigma_hi"] = number(e.sigma_hi);
  j["log_bound"] = number(e.log_bound);
  j["slack"] = number(e.slack);
  j["tolerance"] = number(e.tolerance);
  j["vacuous"] = e.vacuous;
  return j;
}

Json to_json(const CkReport& r, bool with_entries) {
  Json j;
  j["k"] = r.k;
  j["verdict"] = std::string(to_string(r.verdict));
  j["pair_exponent"] = r.pair_exponent;
  j["K"] = r.K;
  j["Kprime"] = r.Kprime;
  j["N"] = r.N;
  j["theta0"] = number(r.theta0);
  j["theta_k"] = number(r.theta_k);
  j["pairs"] = r.pairs.size();
  j["r_grid"] = array(r.r_grid);
  j["Nprime_grid"] = array(r.Nprime_grid);
  j["worst_slack"] = number(r.worst_slack);
  j["witness"] = r.witness ? to_json(*r.witness) : Json();
  if (with_entries) {
    Json e = Json::array();
    for (const CkEntry& x : r.entries) e.push_back(to_json(x));
    j["entries"] = std::move(e);
  }
  return j;
}

Json to_json(const RecursionReport& r) {
  Json j;
  j["from_k"] = r.from_k;
  j["to_k"] = r.from_k - 1;
  j["verdict"] = std::string(to_string(r.verdict));
  j["max_gap"] = number(r.max_gap);
  j["flagged"] = r.flagged;
  j["inputs_hold"] = r.inputs_hold;
  j["bounds_agree"] = r.bounds_agree;
  j["compared"] = r.entries.size();
  j["direct"] = to_json(r.direct, false);
  return j;
}

Json to_json(const LocalCoverReport& r) {
  Json j;
  j["verdict"] = std::string(to_string(r.verdict));
  if (!r.reason.empty()) j["reason"] = r.reason;
  if (r.witness) {
    const CoverWitness& w = *r.witness;
    j["witness"] = {{"stage", w.stage},
                    {"cell", w.cell ? Json(*w.cell) : Json()},
                    {"t", number(w.t)},
                    {"Nprime", number(w.Nprime)},
                    {"margin", number(w.margin)}};
  } else {
    j["witness"] = Json();
  }
  j["R"] = r.R;
  j["o"] = r.o;
  j["K"] = r.K;
  j["N"] = r.N;
  j["Kprime"] = r.Kprime;
  j["lambda"] = r.lambda;
  j["kappa"] = r.kappa;
  j["theta0"] = number(r.theta0);
  j["theta_support"] = number(r.theta_support);
  j["theta_relation"] = r.theta_relation;
  j["assembly_holds"] = r.assembly_holds;
  j["max_equality_gap"] = number(r.max_equality_gap);
  j["mixture_law_checks"] = r.mixture_law_checks;
  Json cells = Json::array();
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const CoverCell& c = r.cells[i];
    cells.push_back({{"index", i},
                     {"L", Json::array({c.lo, c.hi})},
                     {"X", Json::array({c.x_lo, c.x_hi})},
                     {"usable", c.usable}});
  }
  j["cells"] = std::move(cells);
  Json local = Json::array();
  for (const LocalDraw& d : r.local) {
    Json v = to_json(d.verdict, false);
    v.erase("t_grid");
    v.erase("Nprime_grid");
    local.push_back({{"cell", d.cell}, {"check", std::move(v)}});
  }
  j["local"] = std::move(local);
  j["ck_kappa"] = r.ck_kappa ? to_json(*r.ck_kappa, false) : Json();
  Json chain = Json::array();
  for (const RecursionReport& c : r.chain) chain.push_back(to_json(c));
  j["chain"] = std::move(chain);
  Json blocks = Json::array();
  for (const BlockCheck& b : r.blocks) {
    blocks.push_back({{"s", to_string(b.s)},
                      {"t", to_string(b.t)},
                      {"cell", b.cell},
                      {"u", Json::array({b.u_lo, b.u_hi})},
                      {"alpha", b.alpha},
                      {"theta", number(b.theta)},
                      {"theta_ok", b.theta_ok},
                      {"contained", b.contained},
                      {"worst_slack", number(b.worst_slack)},
                      {"worst_at", b.worst_at ? Json::array({b.worst_at->first, b.worst_at->second}) : Json()}});
  }
  j["blocks"] = std::move(blocks);
  std::size_t failing = 0;
  double worst_sum = -kInf;
  for (const AssemblyEntry& a : r.assembly) {
    if (!a.sum_inequality) ++failing;
    if (!a.vacuous) worst_sum = std::max(worst_sum, a.log_block_sum - a.log_global_bound);
  }
  j["assembly"] = {{"entries", r.assembly.size()},
                   {"sum_inequality_failures", failing},
                   {"max_log_block_sum_minus_bound", number(worst_sum)}};
  j["remarks"] = strings(r.remarks);
  return j;
}

std::string margins_csv(const CdVerdict& v) {
  std::ostringstream out;
  out << "t,Nprime,S,R,margin\n";
  for (const MarginEntry& e : v.margins) {
    out << format_double(e.t) << ',' << format_double(e.Nprime) << ',' << format_double(e.S) << ','
        << format_double(e.R.to_double()) << ',' << format_double(e.margin) << '\n';
  }
  return out.str();
}

std::string ck_csv(const CkReport& r) {
  std::ostringstream out;
  out << "k,s,t,r,Nprime,log_S_s,log_S_x,log_S_t,log_bound,slack,tolerance,vacuous\n";
  for (const CkEntry& e : r.entries) {
    out << r.k << ',' << to_string(e.s) << ',' << to_string(e.t) << ',' << format_double(e.r) << ','
        << format_double(e.Nprime) << ',' << format_double(e.log_S_s) << ',' << format_double(e.log_S_x) << ','
        << format_double(e.log_S_t) << ',' << format_double(e.log_bound) << ',' << format_double(e.slack) << ','
        << format_double(e.tolerance) << ',' << csv_bool(e.vacuous) << '\n';
  }
  return out.str();
}

std::string recursion_csv(const RecursionReport& r) {
  std::ostringstream out;
  out << "from_k,s,t,r,Nprime,log_derived,log_direct,gap,flagged,vacuous\n";
  for (const RecursionEntry& e : r.entries) {
    out << r.from_k << ',' << to_string(e.s) << ',' << to_string(e.t) << ',' << format_double(e.r) << ','
        << format_double(e.Nprime) << ',' << format_double(e.log_derived) << ',' << format_double(e.log_direct)
        << ',' << format_double(e.gap) << ',' << csv_bool(e.flagged) << ',' << csv_bool(e.vacuous) << '\n';
  }
  return out.str();
}

std::string blocks_csv(const LocalCoverReport& r) {
  std::ostringstream out;
  out << "s,t,cell,u_lo,u_hi,alpha,theta,theta_ok,contained,worst_slack\n";
  for (const BlockCheck& b : r.blocks) {
    out << to_string(b.s) << ',' << to_string(b.t) << ',' << b.cell << ',' << format_double(b.u_lo) << ','
        << format_double(b.u_hi) << ',' << format_double(b.alpha) << ',' << format_double(b.theta) << ','
        << csv_bool(b.theta_ok) << ',' << csv_bool(b.contained) << ',' << format_double(b.worst_slack) << '\n';
  }
  return out.str();
}

std::string assembly_csv(const LocalCoverReport& r) {
  std::ostringstream out;
  out << "s,t,r,Nprime,equality_gap,log_block_sum,log_global_bound,sum_inequality,assembled_slack,vacuous\n";
  for (const AssemblyEntry& a : r.assembly) {
    out << to_string(a.s) << ',' << to_string(a.t) << ',' << format_double(a.r) << ',' << format_double(a.Nprime)
        << ',' << format_double(a.equality_gap) << ',' << format_double(a.log_block_sum) << ','
        << format_double(a.log_global_bound) << ',' << csv_bool(a.sum_inequality) << ','
        << format_double(a.assembled_slack) << ',' << csv_bool(a.vacuous) << '\n';
  }
  return out.str();
}

std::string coupling_csv(const DiscreteCoupling& c) {
  std::ostringstream out;
  out << "source\\target";
  for (std::size_t k = 0; k < c.cols(); ++k) out << ',' << c.target().space()->label(k);
  out << '\n';
  for (std::size_t i = 0; i < c.rows(); ++i) {
    out << c.source().space()->label(i);
    for (std::size_t k = 0; k < c.cols(); ++k) out << ',' << format_double(c.at(i, k));
    out << '\n';
  }
  return out.str();
}

}  // namespace cdstar::io
