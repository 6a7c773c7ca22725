#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

#include "cdstar/cdcheck.hpp"
#include "cdstar/localglobal.hpp"
#include "cdstar/measures.hpp"
#include "cdstar/spaces.hpp"

namespace cdstar::io {

using Json = nlohmann::ordered_json;

// Malformed input. line/column are 1-based; 0 when the problem is not tied
// to a position (a missing field, say).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string source, std::size_t line, std::size_t column, const std::string& message);
  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::string source_;
  std::size_t line_;
  std::size_t column_;
};

Json parse_json(std::string_view text, const std::string& source = "<input>");
Json read_json_file(const std::filesystem::path& path);
// Two-space indent, trailing newline.
std::string dump(const Json& j);

// Non-finite doubles become the strings "inf", "-inf", "nan".
Json number(double x);
Json number(const ExtendedReal& x);
double to_double(const Json& j, const std::string& what);

// {name, domain: [lo, hi], weight: {kind, params}, singular_set, claimed_condition}.
// Also accepted on input: {"model": name, "K": k, "N": n}.
Json space_to_json(const WeightedInterval& space);
WeightedInterval space_from_json(const Json& j, const std::string& source = "<space>");

// {name, labels, coords | distances, weights}.
Json finite_space_to_json(const FiniteMetricSpace& space);
FiniteMetricSpace finite_space_from_json(const Json& j, const std::string& source = "<space>");

// {space_ref, breakpoints, density}; input may give "probabilities" in place
// of "density" (per-cell masses, converted through m).
Json measure_to_json(const GridMeasure& mu, const std::string& space_ref);
GridMeasure grid_measure_from_json(const Json& j, const SpacePtr& space, const std::string& source = "<measure>");

// {space_ref, masses}.
Json measure_to_json(const DiscreteMeasure& mu, const std::string& space_ref);
DiscreteMeasure discrete_measure_from_json(const Json& j, const FiniteSpacePtr& space,
                                           const std::string& source = "<measure>");

// "name(K, N)" for the model spaces, the plain name otherwise.
std::string space_ref_of(const WeightedInterval& space);

// Space named by a measure's space_ref: "name(K, N)" for a model, otherwise
// a path to a space file relative to `base_dir`. Empty when neither applies.
std::optional<WeightedInterval> resolve_space_ref(const std::string& ref, const std::filesystem::path& base_dir);

Json to_json(const MarginEntry& e);
Json to_json(const CdVerdict& v, bool with_margins = true);
Json to_json(const CdMinusReport& r);
Json to_json(const EquivalentFormReport& r);
Json to_json(const CkEntry& e);
Json to_json(const CkReport& r, bool with_entries = false);
Json to_json(const RecursionReport& r);
Json to_json(const LocalCoverReport& r);

// CSV with a header row.
std::string margins_csv(const CdVerdict& v);
std::string ck_csv(const CkReport& r);
std::string recursion_csv(const RecursionReport& r);
std::string blocks_csv(const LocalCoverReport& r);
std::string assembly_csv(const LocalCoverReport& r);
std::string coupling_csv(const DiscreteCoupling& c);

// Shortest round-trip decimal form; "inf" / "-inf" / "nan" otherwise.
std::string format_double(double x);

}  // namespace cdstar::io
