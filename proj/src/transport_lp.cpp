#include "cdstar/transport_lp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cdstar/errors.hpp"

namespace cdstar {

std::vector<double> cross_distances(const DiscreteMeasure& source, const DiscreteMeasure& target) {
  const std::size_t m = source.size();
  const std::size_t n = target.size();
  std::vector<double> d(m * n);
  const auto& a = source.space();
  const auto& b = target.space();
  if (a == b || *a == *b) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = a->distance(i, j);
    return d;
  }
  if (a->coords() && b->coords()) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] = std::abs((*a->coords())[i] - (*b->coords())[j]);
    return d;
  }
  throw DomainError("no distance between points of unrelated finite spaces");
}

DiscreteCoupling::DiscreteCoupling(DiscreteMeasure source, DiscreteMeasure target, std::vector<double> matrix)
    : source_(std::move(source)), target_(std::move(target)), matrix_(std::move(matrix)) {
  const std::size_t m = source_.size();
  const std::size_t n = target_.size();
  if (matrix_.size() != m * n) throw DomainError("coupling matrix has the wrong shape");
  for (double& p : matrix_) {
    if (!std::isfinite(p) || p < -1e-15) throw DomainError("coupling entries must be nonnegative");
    p = std::max(p, 0.0);
  }
  for (std::size_t i = 0; i < m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += matrix_[i * n + j];
    if (std::abs(row - source_.mass(i)) > 1e-12) throw DomainError("coupling row sums differ from the source");
  }
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < m; ++i) col += matrix_[i * n + j];
    if (std::abs(col - target_.mass(j)) > 1e-12) throw DomainError("coupling column sums differ from the target");
  }
  dist_ = cross_distances(source_, target_);
}

double DiscreteCoupling::cost() const {
  double total = 0.0;
  for (std::size_t k = 0; k < matrix_.size(); ++k) total += matrix_[k] * dist_[k] * dist_[k];
  return total;
}

namespace {

struct Basis {
  std::size_t m, n;
  std::vector<char> basic;
  std::vector<double> flow;

  std::size_t idx(std::size_t i, std::size_t j) const { return i * n + j; }
};

void compute_potentials(const Basis& b, const std::vector<double>& c, std::vector<double>& u, std::vector<double>& v) {
  const std::size_t m = b.m, n = b.n;
  std::vector<std::vector<std::size_t>> row_adj(m), col_adj(n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (b.basic[b.idx(i, j)]) {
        row_adj[i].push_back(j);
        col_adj[j].push_back(i);
      }
  std::vector<char> seen_r(m, 0), seen_c(n, 0);
  u.assign(m, 0.0);
  v.assign(n, 0.0);
  std::deque<std::size_t> queue{0};  // nodes: rows 0..m-1, columns m..m+n-1
  seen_r[0] = 1;
  while (!queue.empty()) {
    const std::size_t node = queue.front();
    queue.pop_front();
    if (node < m) {
      for (std::size_t j : row_adj[node]) {
        if (seen_c[j]) continue;
        seen_c[j] = 1;
        v[j] = c[b.idx(node, j)] - u[node];
        queue.push_back(m + j);
      }
    } else {
      const std::size_t j = node - m;
      for (std::size_t i : col_adj[j]) {
        if (seen_r[i]) continue;
        seen_r[i] = 1;
        u[i] = c[b.idx(i, j)] - v[j];
        queue.push_back(i);
      }
    }
  }
  for (char s : seen_r)
    if (!s) throw std::logic_error("transportation basis is not a spanning tree");
  for (char s : seen_c)
    if (!s) throw std::logic_error("transportation basis is not a spanning tree");
}

// Cells on the tree path from row `i` to column `j`, in order.
std::vector<std::size_t> tree_path(const Basis& b, std::size_t i, std::size_t j) {
  const std::size_t m = b.m, n = b.n;
  const std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(m + n, none);
  std::deque<std::size_t> queue{i};
  parent[i] = i;
  while (!queue.empty() && parent[m + j] == none) {
    const std::size_t node = queue.front();
    queue.pop_front();
    if (node < m) {
      for (std::size_t c = 0; c < n; ++c)
        if (b.basic[b.idx(node, c)] && parent[m + c] == none) {
          parent[m + c] = node;
          queue.push_back(m + c);
        }
    } else {
      const std::size_t c = node - m;
      for (std::size_t r = 0; r < m; ++r)
        if (b.basic[b.idx(r, c)] && parent[r] == none) {
          parent[r] = node;
          queue.push_back(r);
        }
    }
  }
  if (parent[m + j] == none) throw std::logic_error("entering cell does not close a cycle");
  std::vector<std::size_t> cells;
  std::size_t node = m + j;
  while (node != i) {
    const std::size_t p = parent[node];
    if (node >= m) cells.push_back(b.idx(p, node - m));
    else cells.push_back(b.idx(node, p - m));
    node = p;
  }
  std::reverse(cells.begin(), cells.end());
  return cells;
}

bool optimal_face_is_vertex(const Basis& b, const std::vector<double>& reduced, double face_tol) {
  const std::size_t m = b.m, n = b.n;
  auto positive = [&](std::size_t r, std::size_t c) { return b.flow[b.idx(r, c)] > 1e-14; };
  auto allowed = [&](std::size_t r, std::size_t c) { return reduced[b.idx(r, c)] <= face_tol; };
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!allowed(i, j) || positive(i, j)) continue;
      // Raise (i,j); look for an alternating path col j -> ... -> row i.
      std::vector<char> seen_r(m, 0), seen_c(n, 0);
      std::deque<std::size_t> cols{j};
      seen_c[j] = 1;
      while (!cols.empty()) {
        const std::size_t c = cols.front();
        cols.pop_front();
        for (std::size_t r = 0; r < m; ++r) {
          if (seen_r[r] || !positive(r, c)) continue;
          if (r == i) return false;
          seen_r[r] = 1;
          for (std::size_t c2 = 0; c2 < n; ++c2) {
            if (!seen_c[c2] && allowed(r, c2)) {
              seen_c[c2] = 1;
              cols.push_back(c2);
            }
          }
        }
      }
    }
  }
  return true;
}

}  // namespace

TransportSolution solve_transportation(const std::vector<double>& supply, const std::vector<double>& demand,
                                       const std::vector<double>& cost) {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0 || cost.size() != m * n) throw DomainError("transportation problem has the wrong shape");
  const double ts = std::accumulate(supply.begin(), supply.end(), 0.0);
  const double td = std::accumulate(demand.begin(), demand.end(), 0.0);
  if (std::abs(ts - td) > 1e-12 * std::max(1.0, ts)) throw DomainError("infeasible marginals: mass mismatch");
  double scale = 1.0;
  for (double c : cost) {
    if (!std::isfinite(c)) throw DomainError("transport costs must be finite");
    scale = std::max(scale, std::abs(c));
  }
  const double price_tol = 1e-12 * scale;

  Basis b{m, n, std::vector<char>(m * n, 0), std::vector<double>(m * n, 0.0)};
  {
    std::size_t i = 0, j = 0;
    double ra = supply[0], rb = demand[0];
    while (true) {
      const double q = std::max(0.0, std::min(ra, rb));
      b.flow[b.idx(i, j)] = q;
      b.basic[b.idx(i, j)] = 1;
      ra -= q;
      rb -= q;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) {
        rb = demand[++j];
      } else if (j == n - 1 || ra <= rb) {
        ra = supply[++i];
      } else {
        rb = demand[++j];
      }
    }
  }

  TransportSolution out;
  std::vector<double> reduced(m * n, 0.0);
  bool bland = false;
  std::size_t degenerate_run = 0;
  const std::size_t max_pivots = 200000;
  for (;;) {
    compute_potentials(b, cost, out.u, out.v);
    std::size_t enter = m * n;
    double best = -price_tol;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t k = b.idx(i, j);
        reduced[k] = cost[k] - out.u[i] - out.v[j];
        if (b.basic[k] || (bland && enter != m * n)) continue;
        if (reduced[k] < best) {
          best = reduced[k];
          enter = k;
          if (bland) break;
        }
      }
    }
    if (enter == m * n) break;
    if (++out.pivots > max_pivots) throw std::runtime_error("transportation simplex did not terminate");
    const std::size_t ei = enter / n, ej = enter % n;
    const std::vector<std::size_t> path = tree_path(b, ei, ej);
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = m * n;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const double f = b.flow[path[p]];
      if (f < theta || (f == theta && path[p] < leave)) {
        theta = f;
        leave = path[p];
      }
    }
    b.flow[enter] += theta;
    for (std::size_t p = 0; p < path.size(); ++p) b.flow[path[p]] += (p % 2 == 0 ? -theta : theta);
    for (std::size_t p = 0; p < path.size(); p += 2) b.flow[path[p]] = std::max(0.0, b.flow[path[p]]);
    b.flow[leave] = 0.0;
    b.basic[leave] = 0;
    b.basic[enter] = 1;
    if (theta <= 1e-18) {
      if (++degenerate_run > 50 * (m + n)) bland = true;
    } else {
      degenerate_run = 0;
    }
  }
  out.flow = b.flow;
  out.cost = 0.0;
  for (std::size_t k = 0; k < m * n; ++k) out.cost += cost[k] * out.flow[k];
  out.unique = optimal_face_is_vertex(b, reduced, 1e-10 * scale);
  return out;
}

double permutation_minimum(const std::vector<double>& cost, std::size_t n) {
  if (n == 0 || n > 10 || cost.size() != n * n) throw DomainError("permutation enumeration needs 1 <= n <= 10");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + perm[i]];
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

LpTransport w2_lp_oracle(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  const std::vector<std::size_t> s0 = mu0.support();
  const std::vector<std::size_t> s1 = mu1.support();
  if (s0.size() > 64 || s1.size() > 64) throw DomainError("LP oracle limited to supports of size <= 64");
  const std::vector<double> d = cross_distances(mu0, mu1);
  const std::size_t n_full = mu1.size();
  const std::size_t m = s0.size(), n = s1.size();
  std::vector<double> supply(m), demand(n), cost(m * n);
  for (std::size_t a = 0; a < m; ++a) supply[a] = mu0.mass(s0[a]);
  for (std::size_t b = 0; b < n; ++b) demand[b] = mu1.mass(s1[b]);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double dist = d[s0[a] * n_full + s1[b]];
      cost[a * n + b] = dist * dist;
    }
  TransportSolution sol = solve_transportation(supply, demand, cost);

  std::vector<double> matrix(mu0.size() * n_full, 0.0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = 0; b < n; ++b) matrix[s0[a] * n_full + s1[b]] = sol.flow[a * n + b];
  // Restore exact marginals lost to roundoff in the pivots.
  for (std::size_t a = 0; a < m; ++a) {
    double row = 0.0;
    std::size_t big = s1[0];
    for (std::size_t b = 0; b < n; ++b) {
      row += matrix[s0[a] * n_full + s1[b]];
      if (matrix[s0[a] * n_full + s1[b]] > matrix[s0[a] * n_full + big]) big = s1[b];
    }
    matrix[s0[a] * n_full + big] += mu0.mass(s0[a]) - row;
  }

  LpTransport out{sol.cost, DiscreteCoupling(mu0, mu1, std::move(matrix)), sol.unique, sol.u, sol.v, std::nullopt};
  if (m == n && m <= 8) {
    bool equal_masses = true;
    for (std::size_t a = 0; a < m; ++a)
      equal_masses = equal_masses && std::abs(supply[a] - 1.0 / m) <= 1e-12 && std::abs(demand[a] - 1.0 / m) <= 1e-12;
    if (equal_masses) {
      const double enumerated = permutation_minimum(cost, m) / static_cast<double>(m);
      out.enumeration_cost = enumerated;
      if (std::abs(enumerated - sol.cost) > 1e-12 * (1.0 + enumerated)) {
        throw std::logic_error("LP optimum " + std::to_string(sol.cost) + " disagrees with enumeration " +
                               std::to_string(enumerated));
      }
    }
  }
  return out;
}

}  // namespace cdstar
