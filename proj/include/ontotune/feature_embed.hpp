#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontotune/common.hpp"
#include "ontotune/plan_model.hpp"
#include "ontotune/sql_features.hpp"
#include "ontotune/sql_parser.hpp"

namespace ontotune {

/// Ordered, duplicate-free universe of the columns a query references.
/// Ordering is lexicographic by (table, column) so matrix layouts are
/// reproducible.
struct ColumnUniverse {
  std::vector<ColumnRef> columns;

  std::size_t size() const { return columns.size(); }
  int index_of(const ColumnRef& c) const {
    auto it = std::lower_bound(columns.begin(), columns.end(), c);
    if (it == columns.end() || *it != c) return -1;
    return static_cast<int>(it - columns.begin());
  }
};

inline ColumnUniverse build_column_universe(const ParsedQuery& pq) {
  ColumnUniverse u;
  u.columns.assign(pq.columns.begin(), pq.columns.end());  // std::set is already sorted
  return u;
}

enum class ChannelKind { TemplateBroadcast, PlanShare, OperatorShare, ColumnTrait, Mask };

struct Channel {
  std::string name;
  ChannelKind kind;
};

// Registry version 1. One row per channel; one-hot buckets occupy one row per
// position; operator shares get one row per operator enum kind.
inline const std::vector<Channel>& channel_registry_v1() {
  static const std::vector<Channel> reg = [] {
    std::vector<Channel> r = {
        {"tpl_has_distinct", ChannelKind::TemplateBroadcast},
        {"tpl_need_sort_for_merge", ChannelKind::TemplateBroadcast},
        {"tpl_group_by_bucket_0", ChannelKind::TemplateBroadcast},
        {"tpl_group_by_bucket_1", ChannelKind::TemplateBroadcast},
        {"tpl_group_by_bucket_2", ChannelKind::TemplateBroadcast},
        {"tpl_group_by_bucket_3", ChannelKind::TemplateBroadcast},
        {"tpl_rows_bucket_0", ChannelKind::TemplateBroadcast},
        {"tpl_rows_bucket_1", ChannelKind::TemplateBroadcast},
        {"tpl_rows_bucket_2", ChannelKind::TemplateBroadcast},
        {"sql_has_window", ChannelKind::TemplateBroadcast},
        {"sql_has_like", ChannelKind::TemplateBroadcast},
        {"sql_num_join_bucket_0", ChannelKind::TemplateBroadcast},
        {"sql_num_join_bucket_1", ChannelKind::TemplateBroadcast},
        {"sql_num_join_bucket_2", ChannelKind::TemplateBroadcast},
        {"sql_num_subquery_bucket_0", ChannelKind::TemplateBroadcast},
        {"sql_num_subquery_bucket_1", ChannelKind::TemplateBroadcast},
        {"plan_cost_share", ChannelKind::PlanShare},
        {"plan_rows_share", ChannelKind::PlanShare},
        {"col_cost_from_scan_share", ChannelKind::PlanShare},
        {"col_cost_from_agg_share", ChannelKind::PlanShare},
    };
    for (int k = 0; k < kOperatorTypeCount; ++k)
      r.push_back({std::string("plan_cost_op_") + operator_name(static_cast<OperatorType>(k)) +
                       "_share",
                   ChannelKind::OperatorShare});
    r.push_back({"col_is_numeric", ChannelKind::ColumnTrait});
    r.push_back({"col_is_indexed", ChannelKind::ColumnTrait});
    r.push_back({"col_in_where", ChannelKind::ColumnTrait});
    r.push_back({"col_in_join", ChannelKind::ColumnTrait});
    r.push_back({"col_in_orderby", ChannelKind::ColumnTrait});
    r.push_back({"is_real_column", ChannelKind::Mask});
    return r;
  }();
  return reg;
}

inline constexpr int kRegistryVersion = 1;

inline std::size_t registry_rows() { return channel_registry_v1().size(); }

inline int channel_row(const std::string& name) {
  const auto& reg = channel_registry_v1();
  for (std::size_t i = 0; i < reg.size(); ++i)
    if (reg[i].name == name) return static_cast<int>(i);
  throw ConfigError("unknown channel '" + name + "'");
}

struct FeatureMatrix {
  std::vector<double> values;  // row-major, rows x cols
  std::size_t rows = 0;
  std::size_t cols = 0;
  ColumnUniverse universe;
  int registry_version = kRegistryVersion;
  std::string context_id;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct PlanShares {
  std::vector<double> cost_share;
  std::vector<double> rows_share;
  bool cost_degenerate = false;  // zero total cost
  bool rows_degenerate = false;
};

namespace detail {

// Shares may exceed 1 only by accumulated rounding; anything worse means the
// inputs are broken.
inline double clamp_share(double v, const char* what) {
  if (v > 1.0) {
    if (v > 1.0 + 1e-9)
      throw ValidationError(std::string(what) + " exceeds 1 beyond float tolerance: " +
                            format_double(v));
    return 1.0;
  }
  return v;
}

}  // namespace detail

/// Share broadcasting from plan nodes to columns: each column accumulates
/// cost(p)/total over the nodes whose column set contains it, and likewise
/// for rows. A zero total produces an all-zero (degenerate) vector rather
/// than a division error.
inline PlanShares compute_plan_shares(const PlanTree& plan, const ColumnUniverse& universe) {
  PlanShares out;
  out.cost_share.assign(universe.size(), 0.0);
  out.rows_share.assign(universe.size(), 0.0);

  const double cost_total = total_cost(plan);
  const double rows_total = total_rows(plan);
  out.cost_degenerate = !(cost_total > 0.0);
  out.rows_degenerate = !(rows_total > 0.0);

  for (const PlanNode& n : plan.nodes) {
    for (const ColumnRef& c : n.column_set) {
      int idx = universe.index_of(c);
      if (idx < 0) continue;
      if (!out.cost_degenerate) out.cost_share[static_cast<std::size_t>(idx)] += n.est_cost / cost_total;
      if (!out.rows_degenerate) out.rows_share[static_cast<std::size_t>(idx)] += n.est_rows / rows_total;
    }
  }
  for (auto& v : out.cost_share) v = detail::clamp_share(v, "plan_cost_share");
  for (auto& v : out.rows_share) v = detail::clamp_share(v, "plan_rows_share");
  return out;
}

struct OperatorShares {
  std::array<double, kOperatorTypeCount> share{};  // indexed by OperatorType
  std::vector<double> scan_cost_share;             // Eq. restricted to scan nodes
  std::vector<double> agg_cost_share;              // Eq. restricted to Aggregate nodes
  bool degenerate = false;                         // zero total cost
};

inline bool is_scan(OperatorType op) {
  return op == OperatorType::SeqScan || op == OperatorType::IndexScan;
}

inline OperatorShares compute_operator_shares(const PlanTree& plan,
                                              const ColumnUniverse& universe) {
  OperatorShares out;
  out.scan_cost_share.assign(universe.size(), 0.0);
  out.agg_cost_share.assign(universe.size(), 0.0);

  const double cost_total = total_cost(plan);
  out.degenerate = !(cost_total > 0.0);
  if (out.degenerate) return out;

  for (const PlanNode& n : plan.nodes) {
    const double frac = n.est_cost / cost_total;
    out.share[static_cast<std::size_t>(n.op)] += frac;
    if (is_scan(n.op) || n.op == OperatorType::Aggregate) {
      for (const ColumnRef& c : n.column_set) {
        int idx = universe.index_of(c);
        if (idx < 0) continue;
        if (is_scan(n.op)) out.scan_cost_share[static_cast<std::size_t>(idx)] += frac;
        if (n.op == OperatorType::Aggregate) out.agg_cost_share[static_cast<std::size_t>(idx)] += frac;
      }
    }
  }
  for (auto& v : out.share) v = detail::clamp_share(v, "operator share");
  for (auto& v : out.scan_cost_share) v = detail::clamp_share(v, "col_cost_from_scan_share");
  for (auto& v : out.agg_cost_share) v = detail::clamp_share(v, "col_cost_from_agg_share");
  return out;
}

// numeric/indexed traits come from a catalog side-file, not a live catalog.
struct ColumnTraits {
  bool numeric = false;
  bool indexed = false;
};

struct Catalog {
  std::map<ColumnRef, ColumnTraits> traits;

  ColumnTraits lookup(const ColumnRef& c) const {
    auto it = traits.find(c);
    return it == traits.end() ? ColumnTraits{} : it->second;
  }
};

inline Catalog catalog_from_json(const nlohmann::json& doc) {
  Catalog cat;
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array())
    throw IngestError("catalog must be an object with a columns array");
  for (const auto& entry : doc["columns"]) {
    ColumnRef cr{entry.at("table").get<std::string>(), entry.at("column").get<std::string>()};
    ColumnTraits t;
    t.numeric = entry.value("numeric", false);
    t.indexed = entry.value("indexed", false);
    cat.traits[cr] = t;
  }
  return cat;
}

/// Builds the full feature matrix for one query context. Template channels
/// broadcast one scalar across every column; plan-derived channels are zero
/// when no plan is available (cold start stays total).
inline FeatureMatrix assemble_matrix(const TemplateFeatures& tf, const ParsedQuery& pq,
                                     const PlanTree* plan, const ColumnUniverse& universe,
                                     const Catalog& catalog = {},
                                     const std::string& context_id = "") {
  ColumnUniverse expected = build_column_universe(pq);
  if (expected.columns != universe.columns)
    throw ValidationError("assemble_matrix: universe does not match the parsed query");

  const auto& reg = channel_registry_v1();
  FeatureMatrix m;
  m.rows = reg.size();
  m.cols = universe.size();
  m.universe = universe;
  m.context_id = context_id;
  m.values.assign(m.rows * m.cols, 0.0);
  if (m.cols == 0) return m;

  auto broadcast = [&](const char* name, double v) {
    int r = channel_row(name);
    for (std::size_t c = 0; c < m.cols; ++c) m.at(static_cast<std::size_t>(r), c) = v;
  };
  auto fill = [&](const char* name, const std::vector<double>& vec) {
    int r = channel_row(name);
    for (std::size_t c = 0; c < m.cols; ++c) m.at(static_cast<std::size_t>(r), c) = vec[c];
  };

  broadcast("tpl_has_distinct", tf.has_distinct);
  broadcast("tpl_need_sort_for_merge", tf.need_sort_for_merge);
  for (int i = 0; i < 4; ++i)
    broadcast(("tpl_group_by_bucket_" + std::to_string(i)).c_str(),
              tf.group_by_bucket[static_cast<std::size_t>(i)]);
  for (int i = 0; i < 3; ++i)
    broadcast(("tpl_rows_bucket_" + std::to_string(i)).c_str(),
              tf.rows_bucket[static_cast<std::size_t>(i)]);
  broadcast("sql_has_window", tf.has_window);
  broadcast("sql_has_like", tf.has_like);
  for (int i = 0; i < 3; ++i)
    broadcast(("sql_num_join_bucket_" + std::to_string(i)).c_str(),
              tf.num_join_bucket[static_cast<std::size_t>(i)]);
  for (int i = 0; i < 2; ++i)
    broadcast(("sql_num_subquery_bucket_" + std::to_string(i)).c_str(),
              tf.num_subquery_bucket[static_cast<std::size_t>(i)]);

  if (plan) {
    PlanShares ps = compute_plan_shares(*plan, universe);
    fill("plan_cost_share", ps.cost_share);
    fill("plan_rows_share", ps.rows_share);
    OperatorShares os = compute_operator_shares(*plan, universe);
    fill("col_cost_from_scan_share", os.scan_cost_share);
    fill("col_cost_from_agg_share", os.agg_cost_share);
    for (int k = 0; k < kOperatorTypeCount; ++k)
      broadcast((std::string("plan_cost_op_") + operator_name(static_cast<OperatorType>(k)) +
                 "_share")
                    .c_str(),
                os.share[static_cast<std::size_t>(k)]);
  }

  const int r_numeric = channel_row("col_is_numeric");
  const int r_indexed = channel_row("col_is_indexed");
  const int r_where = channel_row("col_in_where");
  const int r_join = channel_row("col_in_join");
  const int r_orderby = channel_row("col_in_orderby");
  const int r_mask = channel_row("is_real_column");
  for (std::size_t c = 0; c < m.cols; ++c) {
    const ColumnRef& col = universe.columns[c];
    ColumnTraits t = catalog.lookup(col);
    m.at(static_cast<std::size_t>(r_numeric), c) = t.numeric ? 1.0 : 0.0;
    m.at(static_cast<std::size_t>(r_indexed), c) = t.indexed ? 1.0 : 0.0;
    m.at(static_cast<std::size_t>(r_where), c) = pq.in_where.count(col) ? 1.0 : 0.0;
    m.at(static_cast<std::size_t>(r_join), c) = pq.in_join.count(col) ? 1.0 : 0.0;
    m.at(static_cast<std::size_t>(r_orderby), c) = pq.in_orderby.count(col) ? 1.0 : 0.0;
    m.at(static_cast<std::size_t>(r_mask), c) = 1.0;
  }

  for (double v : m.values)
    if (!std::isfinite(v)) throw ValidationError("feature matrix contains a non-finite value");
  return m;
}

inline FeatureMatrix pad_to_shape(const FeatureMatrix& m, std::size_t c_max) {
  if (m.cols > c_max)
    throw ValidationError("pad_to_shape: matrix has " + std::to_string(m.cols) +
                          " columns, capacity is " + std::to_string(c_max));
  FeatureMatrix out;
  out.rows = registry_rows();
  out.cols = c_max;
  out.universe = m.universe;
  out.registry_version = m.registry_version;
  out.context_id = m.context_id;
  out.values.assign(out.rows * out.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c);
  return out;
}

// Golden-matrix text form: one row per line, space-separated, 9 significant
// digits.
inline std::string matrix_to_text(const FeatureMatrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c) out += ' ';
      out += format_double_sig9(m.at(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace ontotune
