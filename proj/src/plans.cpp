#include "cdstar/plans.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "cdstar/errors.hpp"

namespace cdstar {
namespace {

constexpr double kMidpointTolerance = 1e-12;

// cost(k, l) = c(x_k, y_l) for support pairs k, l.
bool cyclically_monotone_core(std::size_t L, const std::function<double(std::size_t, std::size_t)>& cost) {
  if (L <= 1) return true;
  double scale = 1.0;
  for (std::size_t k = 0; k < L; ++k) scale = std::max(scale, std::abs(cost(k, k)));
  const double tol = 1e-12 * scale;
  auto improves = [&](const std::size_t* cyc, std::size_t len) {
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      before += cost(cyc[i], cyc[i]);
      after += cost(cyc[i], cyc[(i + 1) % len]);
    }
    return after < before - tol;
  };
  std::size_t cyc[4];
  for (std::size_t a = 0; a < L; ++a)
    for (std::size_t b = a + 1; b < L; ++b) {
      cyc[0] = a;
      cyc[1] = b;
      if (improves(cyc, 2)) return false;
    }
  if (L <= 12) {
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = a + 1; b < L; ++b)
        for (std::size_t c = a + 1; c < L; ++c) {
          if (c == b) continue;
          cyc[0] = a;
          cyc[1] = b;
          cyc[2] = c;
          if (improves(cyc, 3)) return false;
          for (std::size_t d = a + 1; d < L; ++d) {
            if (d == b || d == c) continue;
            cyc[3] = d;
            if (improves(cyc, 4)) return false;
          }
        }
    return true;
  }
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  for (int trial = 0; trial < 20000; ++trial) {
    const std::size_t len = 3 + (trial & 1);
    for (std::size_t i = 0; i < len; ++i) {
      bool fresh;
      do {
        cyc[i] = static_cast<std::size_t>(rng() % L);
        fresh = std::find(cyc, cyc + i, cyc[i]) == cyc + i;
      } while (!fresh);
    }
    if (improves(cyc, len)) return false;
  }
  return true;
}

std::vector<std::pair<double, double>> merge_positions(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> out;
  for (const auto& p : pts) {
    if (!out.empty() && out.back().first == p.first) out.back().second += p.second;
    else out.push_back(p);
  }
  return out;
}

bool same_marginal(const std::vector<std::pair<double, double>>& a, const std::vector<std::pair<double, double>>& b,
                   double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].first - b[i].first) > tol || std::abs(a[i].second - b[i].second) > tol) return false;
  }
  return true;
}

}  // namespace

DiscretePlan::DiscretePlan(std::vector<PlanAtom> atoms) : atoms_(std::move(atoms)) {
  double total = 0.0;
  for (const PlanAtom& a : atoms_) {
    if (!std::isfinite(a.x0) || !std::isfinite(a.x1)) throw DomainError("plan endpoints must be finite");
    if (!std::isfinite(a.mass) || a.mass < 0.0) throw DomainError("plan masses must be nonnegative");
    total += a.mass;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("plan masses sum to " + std::to_string(total));
}

double DiscretePlan::cost() const {
  double total = 0.0;
  for (const PlanAtom& a : atoms_) total += a.mass * (a.x1 - a.x0) * (a.x1 - a.x0);
  return total;
}

std::vector<std::pair<double, double>> DiscretePlan::marginal(double t) const {
  std::vector<std::pair<double, double>> pts;
  for (const PlanAtom& a : atoms_) {
    if (a.mass > 0.0) pts.emplace_back(a.at(t), a.mass);
  }
  return merge_positions(std::move(pts));
}

DiscretePlan canonical(const DiscretePlan& p) {
  std::map<std::pair<double, double>, double> merged;
  for (const PlanAtom& a : p.atoms()) {
    if (a.mass > 0.0) merged[{a.x0, a.x1}] += a.mass;
  }
  std::vector<PlanAtom> atoms;
  for (const auto& [key, mass] : merged) atoms.push_back({key.first, key.second, mass});
  return DiscretePlan(std::move(atoms));
}

DiscretePlan restrict_plan(const DiscretePlan& p, double r, double s) {
  if (!(r >= 0.0 && s <= 1.0 && r < s)) throw DomainError("restrict_plan needs 0 <= r < s <= 1");
  std::vector<PlanAtom> atoms;
  atoms.reserve(p.size());
  for (const PlanAtom& a : p.atoms()) atoms.push_back({a.at(r), a.at(s), a.mass});
  DiscretePlan out(std::move(atoms));
  if (is_cyclically_monotone(p) && !is_cyclically_monotone(out)) {
    throw std::logic_error("restriction lost cyclical monotonicity");
  }
  return out;
}

SplitPlan split_plan(const DiscretePlan& p, double t) {
  if (!(t > 0.0 && t < 1.0)) throw DomainError("split_plan needs t in (0,1)");
  std::vector<PlanAtom> left, right;
  for (const PlanAtom& a : p.atoms()) {
    const double x = a.at(t);
    left.push_back({a.x0, x, a.mass});
    right.push_back({x, a.x1, a.mass});
  }
  return {DiscretePlan(std::move(left)), DiscretePlan(std::move(right))};
}

DiscretePlan glue_plans(const DiscretePlan& left, const DiscretePlan& right) {
  if (left.size() != right.size()) throw DomainError("glue_plans needs matching atom lists");
  std::vector<PlanAtom> atoms;
  for (std::size_t i = 0; i < left.size(); ++i) {
    const PlanAtom& l = left.atoms()[i];
    const PlanAtom& r = right.atoms()[i];
    if (l.x1 != r.x0 || l.mass != r.mass) throw DomainError("glue_plans: atom " + std::to_string(i) + " does not meet");
    atoms.push_back({l.x0, r.x1, l.mass});
  }
  return DiscretePlan(std::move(atoms));
}

DiscretePlan mix_plans(const DiscretePlan& p_mu, const DiscretePlan& p_nu, double t) {
  if (!(t > 0.0 && t < 1.0)) throw DomainError("mix_plans needs t in (0,1)");
  std::vector<PlanAtom> half;
  for (const PlanAtom& a : p_mu.atoms()) half.push_back({a.x0, a.x1, 0.5 * a.mass});
  for (const PlanAtom& a : p_nu.atoms()) half.push_back({a.x0, a.x1, 0.5 * a.mass});
  const DiscretePlan half_sum(half);
  if (!is_cyclically_monotone(half_sum)) {
    throw DomainError("plans are not dominated by a common cyclically monotone set");
  }

  double scale = 1.0;
  for (const PlanAtom& a : half) scale = std::max({scale, std::abs(a.x0), std::abs(a.x1)});

  // Disintegrate both halves at time t: group atoms by midpoint.
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < half.size(); ++k)
    if (half[k].mass > 0.0) order.push_back(k);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return half[a].at(t) < half[b].at(t); });
  std::vector<PlanAtom> mixed;
  for (std::size_t g = 0; g < order.size();) {
    const double x = half[order[g]].at(t);
    std::size_t e = g;
    while (e < order.size() && half[order[e]].at(t) - x <= kMidpointTolerance) ++e;
    double eta_left = 0.0, eta_right = 0.0;
    for (std::size_t k = g; k < e; ++k) {
      eta_left += half[order[k]].mass;
      eta_right += half[order[k]].mass;
    }
    if (std::abs(eta_left - eta_right) > 1e-15) throw DomainError("midpoint masses disagree; cannot disintegrate");
    for (std::size_t a = g; a < e; ++a) {
      for (std::size_t b = g; b < e; ++b) {
        const PlanAtom& l = half[order[a]];
        const PlanAtom& r = half[order[b]];
        const double glued_mid = (1.0 - t) * l.x0 + t * r.x1;
        if (std::abs(glued_mid - x) > 1e-9 * scale) {
          throw DomainError("glued curve through x=" + std::to_string(x) + " is not a geodesic");
        }
        mixed.push_back({l.x0, r.x1, l.mass * r.mass / eta_left});
      }
    }
    g = e;
  }
  DiscretePlan out = canonical(DiscretePlan(std::move(mixed)));

  const double tol = 1e-12 * scale * scale;
  if (std::abs(out.cost() - half_sum.cost()) > tol * (1.0 + half_sum.cost()) ||
      !same_marginal(out.marginal(0.0), half_sum.marginal(0.0), 1e-12 * scale) ||
      !same_marginal(out.marginal(1.0), half_sum.marginal(1.0), 1e-12 * scale)) {
    throw std::logic_error("mixed plan does not preserve cost and marginals of the half-sum");
  }
  return out;
}

bool is_cyclically_monotone(const DiscreteCoupling& c) {
  std::vector<std::pair<std::size_t, std::size_t>> support;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j)
      if (c.at(i, j) > 0.0) support.emplace_back(i, j);
  return cyclically_monotone_core(support.size(), [&](std::size_t k, std::size_t l) {
    const double d = c.distance(support[k].first, support[l].second);
    return d * d;
  });
}

bool is_cyclically_monotone(const DiscretePlan& p) {
  std::vector<const PlanAtom*> support;
  for (const PlanAtom& a : p.atoms())
    if (a.mass > 0.0) support.push_back(&a);
  return cyclically_monotone_core(support.size(), [&](std::size_t k, std::size_t l) {
    const double d = support[k]->x0 - support[l]->x1;
    return d * d;
  });
}

}  // namespace cdstar
