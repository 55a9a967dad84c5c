#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ontotune/common.hpp"

namespace ontotune {

// (table, column) pair; ordering is lexicographic so column universes and
// triple exports come out deterministic.
struct ColumnRef {
  std::string table;
  std::string column;

  auto operator<=>(const ColumnRef&) const = default;
  std::string qualified() const { return table + "." + column; }
};

enum class OperatorType {
  SeqScan,
  IndexScan,
  HashJoin,
  MergeJoin,
  NestLoop,
  Sort,
  Aggregate,
  Other,
};

constexpr int kOperatorTypeCount = 8;

inline const char* operator_name(OperatorType op) {
  switch (op) {
    case OperatorType::SeqScan: return "SeqScan";
    case OperatorType::IndexScan: return "IndexScan";
    case OperatorType::HashJoin: return "HashJoin";
    case OperatorType::MergeJoin: return "MergeJoin";
    case OperatorType::NestLoop: return "NestLoop";
    case OperatorType::Sort: return "Sort";
    case OperatorType::Aggregate: return "Aggregate";
    case OperatorType::Other: return "Other";
  }
  return "Other";
}

inline OperatorType operator_from_name(const std::string& name) {
  if (name == "SeqScan") return OperatorType::SeqScan;
  if (name == "IndexScan") return OperatorType::IndexScan;
  if (name == "HashJoin") return OperatorType::HashJoin;
  if (name == "MergeJoin") return OperatorType::MergeJoin;
  if (name == "NestLoop") return OperatorType::NestLoop;
  if (name == "Sort") return OperatorType::Sort;
  if (name == "Aggregate") return OperatorType::Aggregate;
  return OperatorType::Other;
}

struct QueryRecord {
  std::string query_id;
  std::string sql_text;
  std::string template_id;
  std::vector<std::string> referenced_tables;
  std::vector<ColumnRef> referenced_columns;
};

struct PlanNode {
  int node_id = 0;
  OperatorType op = OperatorType::Other;
  std::string op_name;  // raw node_type from the source document
  double est_cost = 0.0;
  double est_rows = 0.0;
  std::vector<int> children;
  std::set<ColumnRef> column_set;
  std::string relation;  // scan target; expands to that table's referenced columns
};

struct PlanTree {
  std::string plan_id;
  std::string query_id;  // owning query, for provenance triples
  int root = 0;
  std::vector<PlanNode> nodes;
  std::string fingerprint;

  const PlanNode& node(int id) const {
    for (const auto& n : nodes)
      if (n.node_id == id) return n;
    throw ValidationError("plan " + plan_id + ": unknown node id " + std::to_string(id));
  }
};

struct ArmSpec {
  int arm_id = 0;
  std::string name;
  std::map<std::string, std::string> settings;
};

struct EnvironmentSnapshot {
  std::string env_id;
  std::map<std::string, std::string> settings;
  std::string dataset_tag;
  std::string hardware_tag;
};

struct ExecutionRecord {
  std::string exec_id;
  std::string query_id;
  int arm_id = 0;
  std::string plan_fingerprint;
  std::string env_id;
  int batch_index = 0;
  double runtime_ms = 0.0;
  std::optional<double> predicted_reward;
  std::optional<double> realized_reward;
  std::uint64_t timestamp = 0;  // store-local monotone counter, not wall clock
};

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;

  auto operator<=>(const Triple&) const = default;
};

}  // namespace ontotune
