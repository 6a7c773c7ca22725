#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cdstar/measures.hpp"

namespace cdstar {

// d(x_i, y_j) between the points of two discrete measures: the metric when
// both live on the same space, |x - y| when both spaces carry line
// coordinates.
std::vector<double> cross_distances(const DiscreteMeasure& source, const DiscreteMeasure& target);

// Transport plan pi_ij between two discrete measures (row-major).
class DiscreteCoupling {
 public:
  DiscreteCoupling(DiscreteMeasure source, DiscreteMeasure target, std::vector<double> matrix);

  const DiscreteMeasure& source() const { return source_; }
  const DiscreteMeasure& target() const { return target_; }
  std::size_t rows() const { return source_.size(); }
  std::size_t cols() const { return target_.size(); }
  double at(std::size_t i, std::size_t j) const { return matrix_[i * cols() + j]; }
  const std::vector<double>& matrix() const { return matrix_; }
  double distance(std::size_t i, std::size_t j) const { return dist_[i * cols() + j]; }

  // sum pi_ij d_ij^2
  double cost() const;

  bool operator==(const DiscreteCoupling& other) const {
    return source_ == other.source_ && target_ == other.target_ && matrix_ == other.matrix_;
  }

 private:
  DiscreteMeasure source_;
  DiscreteMeasure target_;
  std::vector<double> matrix_;
  std::vector<double> dist_;
};

// Result of the transportation simplex on a dense cost matrix.
struct TransportSolution {
  std::vector<double> flow;  // m x n, row-major
  std::vector<double> u;     // row potentials
  std::vector<double> v;     // column potentials, c_ij - u_i - v_j >= 0 at optimum
  double cost = 0.0;
  bool unique = true;  // optimal face is a single vertex
  std::size_t pivots = 0;
};

// Exact minimizer of sum c_ij x_ij subject to row sums = supply and column
// sums = demand. Northwest-corner start, MODI pricing, Bland's rule after a
// run of degenerate pivots. Uniqueness: no alternating cycle inside the
// zero-reduced-cost cells can shift mass away from the solution.
TransportSolution solve_transportation(const std::vector<double>& supply, const std::vector<double>& demand,
                                       const std::vector<double>& cost);

// min over permutations s of sum_i c(i, s(i)) for an n x n matrix, n <= 10.
double permutation_minimum(const std::vector<double>& cost, std::size_t n);

struct LpTransport {
  double cost = 0.0;  // W2^2
  DiscreteCoupling coupling;
  bool unique = true;
  std::vector<double> u;  // duals on the source support
  std::vector<double> v;  // duals on the target support
  // Set when both supports have the same size <= 8 with equal masses.
  std::optional<double> enumeration_cost;
};

// Supports of size <= 64.
LpTransport w2_lp_oracle(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1);

}  // namespace cdstar
