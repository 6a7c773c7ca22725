#pragma once

#include <utility>
#include <vector>

#include "cdstar/transport_lp.hpp"

namespace cdstar {

// Constant-speed segment from x0 to x1 on the line carrying `mass`.
struct PlanAtom {
  double x0 = 0.0;
  double x1 = 0.0;
  double mass = 0.0;

  double at(double t) const { return (1.0 - t) * x0 + t * x1; }
  bool operator==(const PlanAtom&) const = default;
};

// Finitely supported geodesic plan on the line.
class DiscretePlan {
 public:
  explicit DiscretePlan(std::vector<PlanAtom> atoms);

  const std::vector<PlanAtom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  // sum mass (x1 - x0)^2
  double cost() const;
  // (e_t)_# plan as sorted (position, mass) pairs, equal positions merged.
  std::vector<std::pair<double, double>> marginal(double t) const;

  bool operator==(const DiscretePlan&) const = default;

 private:
  std::vector<PlanAtom> atoms_;
};

// Atoms sorted by (x0, x1) with identical ones merged.
DiscretePlan canonical(const DiscretePlan& p);

// gamma -> gamma_{r + t (s - r)} on every atom.
DiscretePlan restrict_plan(const DiscretePlan& p, double r, double s);

struct SplitPlan {
  DiscretePlan left;
  DiscretePlan right;
};

// Sp(gamma) = (restriction to [0,t], restriction to [t,1]) atom by atom.
SplitPlan split_plan(const DiscretePlan& p, double t);
// Inverse of split_plan: atom i of `left` must end where atom i of `right`
// starts.
DiscretePlan glue_plans(const DiscretePlan& left, const DiscretePlan& right);

// Mixed plan built from the half-sum of p_mu and p_nu: disintegrate the
// left and right halves at time t by midpoint, take product kernels and glue.
// Throws DomainError when the endpoint pairs of both plans are not jointly
// cyclically monotone.
DiscretePlan mix_plans(const DiscretePlan& p_mu, const DiscretePlan& p_nu, double t);

// No cost-improving cycle of length 2..4 among the support pairs (all cycles
// when the support has at most 12 pairs, otherwise all 2-cycles plus a fixed
// pseudo-random sample of longer ones).
bool is_cyclically_monotone(const DiscreteCoupling& c);
bool is_cyclically_monotone(const DiscretePlan& p);

}  // namespace cdstar
