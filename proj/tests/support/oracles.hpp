#pragma once

// Test-only oracles, kept independent of the implementation paths they check:
// gather-style share evaluation vs the library's scatter-style accumulation.

#include "ontotune/feature_embed.hpp"
#include "ontotune/plan_model.hpp"

namespace ontotune::testing {

inline double gather_cost_share(const PlanTree& plan, const ColumnRef& u) {
  double total = 0.0;
  for (const auto& q : plan.nodes) total += q.est_cost;
  if (!(total > 0.0)) return 0.0;
  double share = 0.0;
  for (const auto& p : plan.nodes)
    if (p.column_set.count(u)) share += p.est_cost / total;
  return share;
}

inline double gather_rows_share(const PlanTree& plan, const ColumnRef& u) {
  double total = 0.0;
  for (const auto& q : plan.nodes) total += q.est_rows;
  if (!(total > 0.0)) return 0.0;
  double share = 0.0;
  for (const auto& p : plan.nodes)
    if (p.column_set.count(u)) share += p.est_rows / total;
  return share;
}

inline double gather_operator_share(const PlanTree& plan, OperatorType op) {
  double total = 0.0;
  for (const auto& q : plan.nodes) total += q.est_cost;
  if (!(total > 0.0)) return 0.0;
  double share = 0.0;
  for (const auto& p : plan.nodes)
    if (p.op == op) share += p.est_cost / total;
  return share;
}

}  // namespace ontotune::testing
