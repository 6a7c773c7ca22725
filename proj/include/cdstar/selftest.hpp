#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdstar/io.hpp"

namespace cdstar {

struct SelftestCheck {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  double worst = 0.0;      // largest deviation seen (check specific)
  double tolerance = 0.0;  // what `worst` was compared with
  std::string detail;      // first failure, if any
};

struct SelftestReport {
  std::uint64_t seed = 0;
  std::vector<SelftestCheck> checks;
  bool passed = true;
};

// Small sampled version of the invariant suite. The report depends only on
// the seed: no timings, results merged by index.
SelftestReport run_selftest(std::uint64_t seed);

io::Json to_json(const SelftestReport& report);

}  // namespace cdstar
