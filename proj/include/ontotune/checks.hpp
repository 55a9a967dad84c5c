#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ontotune/feature_embed.hpp"
#include "ontotune/plan_model.hpp"
#include "ontotune/regressor.hpp"
#include "ontotune/rng.hpp"
#include "ontotune/scaler.hpp"

namespace ontotune {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 20240601;
  std::size_t scaler_samples = 20000;
  std::size_t plan_samples = 200;
  double gradient_fault = 0.0;  // test hook: nonzero breaks the analytic side
};

namespace checkdetail {

// Random plan with optional singleton-and-distinct column sets per node (the
// partition case of the share identity).
inline PlanTree random_plan(Rng& rng, bool singleton_columns) {
  PlanTree plan;
  const int node_count = 1 + static_cast<int>(rng.below(12));
  for (int i = 0; i < node_count; ++i) {
    PlanNode n;
    n.node_id = i;
    n.op = static_cast<OperatorType>(rng.below(kOperatorTypeCount));
    n.op_name = operator_name(n.op);
    n.est_cost = 0.5 + 100.0 * rng.uniform01();
    n.est_rows = 1.0 + 1000.0 * rng.uniform01();
    if (i > 0) plan.nodes[rng.below(static_cast<std::uint64_t>(i))].children.push_back(i);
    plan.nodes.push_back(n);
  }
  const int column_count = 1 + static_cast<int>(rng.below(8));
  for (int i = 0; i < node_count; ++i) {
    if (singleton_columns) {
      plan.nodes[static_cast<std::size_t>(i)].column_set.insert(
          {"t", "c" + std::to_string(i)});
    } else {
      const std::uint64_t picks = rng.below(static_cast<std::uint64_t>(column_count) + 1);
      for (std::uint64_t k = 0; k < picks; ++k)
        plan.nodes[static_cast<std::size_t>(i)].column_set.insert(
            {"t", "c" + std::to_string(rng.below(static_cast<std::uint64_t>(column_count)))});
    }
  }
  plan.root = 0;
  plan.fingerprint = plan_fingerprint(plan);
  return plan;
}

inline ColumnUniverse universe_of(const PlanTree& plan) {
  std::set<ColumnRef> cols;
  for (const auto& n : plan.nodes) cols.insert(n.column_set.begin(), n.column_set.end());
  ColumnUniverse u;
  u.columns.assign(cols.begin(), cols.end());
  return u;
}

inline FeatureMatrix random_feature_input(Rng& rng, const ModelShape& shape) {
  FeatureMatrix x;
  x.rows = shape.rows;
  x.cols = shape.cols;
  x.values.resize(x.rows * x.cols);
  for (auto& v : x.values) v = rng.uniform01();
  return x;
}

}  // namespace checkdetail

inline CheckResult check_scaler_round_trip(const CheckOptions& opts) {
  Rng rng(mix_seed(opts.seed, 1));
  double worst = 0.0;
  for (std::size_t i = 0; i < opts.scaler_samples; ++i) {
    double lo = 0.001 + 10.0 * rng.uniform01();
    double hi = lo * (2.0 + 1000.0 * rng.uniform01());
    LogMinMaxScaler s = LogMinMaxScaler::fit(std::vector<double>{lo, hi});
    double y = lo + (hi - lo) * rng.uniform01();
    if (!(y > 0.0)) continue;
    double err = std::abs(s.phi_inv(s.phi(y)) - y) / (1.0 + y);
    worst = std::max(worst, err);
  }
  return {"scaler_round_trip", worst <= 1e-9, "max |phi_inv(phi(y)) - y| / (1+y) = " + format_double(worst)};
}

inline CheckResult check_complement_involution(const CheckOptions& opts) {
  Rng rng(mix_seed(opts.seed, 2));
  for (std::size_t i = 0; i < opts.scaler_samples; ++i) {
    double x = rng.uniform01();  // multiples of 2^-53, on which 1-x is exact
    if (complement(complement(x)) != x)
      return {"complement_involution", false, "J(J(x)) != x at x = " + format_double(x)};
  }
  return {"complement_involution", true, "exact on " + std::to_string(opts.scaler_samples) + " samples"};
}

inline CheckResult check_share_partition(const CheckOptions& opts) {
  Rng rng(mix_seed(opts.seed, 3));
  double worst = 0.0;
  for (std::size_t i = 0; i < opts.plan_samples; ++i) {
    PlanTree plan = checkdetail::random_plan(rng, /*singleton_columns=*/true);
    ColumnUniverse u = checkdetail::universe_of(plan);
    PlanShares shares = compute_plan_shares(plan, u);
    double sum = 0.0;
    for (double v : shares.cost_share) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return {"share_partition_identity", worst <= 1e-9, "max |sum - 1| = " + format_double(worst)};
}

inline CheckResult check_operator_share_partition(const CheckOptions& opts) {
  Rng rng(mix_seed(opts.seed, 4));
  double worst = 0.0;
  for (std::size_t i = 0; i < opts.plan_samples; ++i) {
    PlanTree plan = checkdetail::random_plan(rng, false);
    OperatorShares os = compute_operator_shares(plan, checkdetail::universe_of(plan));
    double sum = 0.0;
    for (double v : os.share) sum += v;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return {"operator_share_partition", worst <= 1e-9, "max |sum - 1| = " + format_double(worst)};
}

inline CheckResult check_gradients(const CheckOptions& opts) {
  ModelShape shape;
  shape.rows = registry_rows();
  shape.cols = 16;
  shape.arms = 3;
  RewardModel model = RewardModel::init(shape, mix_seed(opts.seed, 5));
  Rng rng(mix_seed(opts.seed, 6));
  std::vector<TrainingSample> data;
  for (int i = 0; i < 4; ++i)
    data.push_back({checkdetail::random_feature_input(rng, shape), static_cast<int>(rng.below(3)),
                    rng.uniform01()});
  auto result = gradient_check(model, data, 128, opts.seed, opts.gradient_fault);
  return {"gradient_check", result.max_relative_error <= 1e-4,
          "max relative error = " + format_double(result.max_relative_error) + " over " +
              std::to_string(result.checked_params) + " params"};
}

inline std::vector<CheckResult> run_builtin_checks(const CheckOptions& opts = {}) {
  return {check_scaler_round_trip(opts), check_complement_involution(opts),
          check_share_partition(opts), check_operator_share_partition(opts),
          check_gradients(opts)};
}

}  // namespace ontotune
