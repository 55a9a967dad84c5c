#pragma once

#include <array>
#include <limits>
#include <optional>
#include <vector>

#include "ontotune/common.hpp"
#include "ontotune/plan_model.hpp"
#include "ontotune/sql_parser.hpp"

namespace ontotune {

// Integer bucket spec: ordered inclusive ranges that must tile the
// nonnegative integers. The last bucket is open-ended (hi = max).
struct BucketSpec {
  struct Range {
    long lo;
    long hi;
  };
  std::vector<Range> ranges;

  void validate() const {
    if (ranges.empty()) throw ConfigError("bucket spec is empty");
    if (ranges.front().lo != 0) throw ConfigError("bucket spec must start at 0");
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (ranges[i].hi < ranges[i].lo) throw ConfigError("bucket spec range is inverted");
      if (i + 1 < ranges.size() && ranges[i + 1].lo != ranges[i].hi + 1)
        throw ConfigError("bucket spec has a gap or overlap after " + std::to_string(ranges[i].hi));
    }
    if (ranges.back().hi != std::numeric_limits<long>::max())
      throw ConfigError("bucket spec must be open-ended");
  }
};

inline std::vector<double> bucketize(long value, const BucketSpec& spec) {
  spec.validate();
  if (value < 0) throw ConfigError("bucketize: value must be nonnegative");
  std::vector<double> onehot(spec.ranges.size(), 0.0);
  for (std::size_t i = 0; i < spec.ranges.size(); ++i) {
    if (value >= spec.ranges[i].lo && value <= spec.ranges[i].hi) {
      onehot[i] = 1.0;
      return onehot;
    }
  }
  throw ConfigError("bucketize: no bucket matched");  // unreachable for a valid spec
}

inline constexpr long kOpenEnd = std::numeric_limits<long>::max();

inline const BucketSpec& join_buckets() {
  static const BucketSpec spec{{{0, 0}, {1, 2}, {3, kOpenEnd}}};
  return spec;
}
inline const BucketSpec& subquery_buckets() {
  static const BucketSpec spec{{{0, 0}, {1, kOpenEnd}}};
  return spec;
}
inline const BucketSpec& group_by_buckets() {
  static const BucketSpec spec{{{0, 0}, {1, 1}, {2, 3}, {4, kOpenEnd}}};
  return spec;
}

// Estimated result-size buckets over the plan root's rows: <1e3, 1e3..<1e6, >=1e6.
inline std::array<double, 3> rows_bucket_from_rows(double est_rows) {
  std::array<double, 3> onehot{0.0, 0.0, 0.0};
  if (est_rows < 1e3)
    onehot[0] = 1.0;
  else if (est_rows < 1e6)
    onehot[1] = 1.0;
  else
    onehot[2] = 1.0;
  return onehot;
}

struct TemplateFeatures {
  double has_distinct = 0.0;
  double need_sort_for_merge = 0.0;
  double has_window = 0.0;
  double has_like = 0.0;
  std::array<double, 4> group_by_bucket{};
  std::array<double, 3> rows_bucket{};
  std::array<double, 3> num_join_bucket{};
  std::array<double, 2> num_subquery_bucket{};
};

namespace detail {

inline bool subtree_contains_sort(const PlanTree& plan, int node_id) {
  const PlanNode& n = plan.node(node_id);
  if (n.op == OperatorType::Sort) return true;
  for (int child : n.children)
    if (subtree_contains_sort(plan, child)) return true;
  return false;
}

// A MergeJoin input needs an explicit sort when its subtree has no Sort node
// and is not rooted at an IndexScan (which delivers ordered rows).
inline bool merge_join_needs_sort(const PlanTree& plan) {
  for (const PlanNode& n : plan.nodes) {
    if (n.op != OperatorType::MergeJoin) continue;
    for (int child : n.children) {
      if (plan.node(child).op == OperatorType::IndexScan) continue;
      if (!subtree_contains_sort(plan, child)) return true;
    }
  }
  return false;
}

}  // namespace detail

inline TemplateFeatures extract_template_features(const ParsedQuery& pq,
                                                  const PlanTree* plan = nullptr) {
  TemplateFeatures tf;
  tf.has_distinct = pq.has_distinct ? 1.0 : 0.0;
  tf.has_window = pq.has_window ? 1.0 : 0.0;
  tf.has_like = pq.has_like ? 1.0 : 0.0;
  tf.need_sort_for_merge = (plan && detail::merge_join_needs_sort(*plan)) ? 1.0 : 0.0;

  auto gb = bucketize(pq.group_by_count, group_by_buckets());
  std::copy(gb.begin(), gb.end(), tf.group_by_bucket.begin());
  auto jb = bucketize(pq.join_count, join_buckets());
  std::copy(jb.begin(), jb.end(), tf.num_join_bucket.begin());
  auto sb = bucketize(pq.subquery_count, subquery_buckets());
  std::copy(sb.begin(), sb.end(), tf.num_subquery_bucket.begin());

  // cold start: no plan means lowest rows bucket so the embedding stays total
  tf.rows_bucket = rows_bucket_from_rows(plan ? plan->node(plan->root).est_rows : 0.0);
  return tf;
}

}  // namespace ontotune
