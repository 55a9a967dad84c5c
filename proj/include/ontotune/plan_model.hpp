#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontotune/common.hpp"
#include "ontotune/types.hpp"

namespace ontotune {

// Plan documents are JSON trees: {node_type, cost, rows, columns[]?,
// relation?, children[]?}. Costs are node-exclusive: the share denominators
// sum cost over all nodes, so cumulative (PostgreSQL-style) totals would
// double-count. Trace generators emit exclusive costs.

namespace detail {

inline ColumnRef parse_column_ref(const std::string& s) {
  auto dot = s.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == s.size())
    throw IngestError("plan column annotation must be table.column, got '" + s + "'");
  return ColumnRef{s.substr(0, dot), s.substr(dot + 1)};
}

inline void ingest_node(const nlohmann::json& doc, PlanTree& tree,
                        const std::vector<ColumnRef>& referenced_columns) {
  if (!doc.is_object()) throw IngestError("plan node must be an object");
  if (!doc.contains("node_type") || !doc["node_type"].is_string())
    throw IngestError("plan node missing node_type");
  const std::string type = doc["node_type"].get<std::string>();
  if (!doc.contains("cost") || !doc["cost"].is_number())
    throw IngestError("plan node '" + type + "' missing cost");
  if (!doc.contains("rows") || !doc["rows"].is_number())
    throw IngestError("plan node '" + type + "' missing rows");

  PlanNode node;
  node.node_id = static_cast<int>(tree.nodes.size());
  node.op_name = type;
  node.op = operator_from_name(type);
  node.est_cost = doc["cost"].get<double>();
  node.est_rows = doc["rows"].get<double>();
  if (node.est_cost < 0.0) throw IngestError("plan node '" + type + "' has negative cost");
  if (node.est_rows < 0.0) throw IngestError("plan node '" + type + "' has negative rows");

  if (doc.contains("columns")) {
    if (!doc["columns"].is_array()) throw IngestError("plan node columns must be an array");
    for (const auto& c : doc["columns"]) node.column_set.insert(parse_column_ref(c.get<std::string>()));
  }
  if (doc.contains("relation")) {
    node.relation = doc["relation"].get<std::string>();
    for (const auto& cr : referenced_columns)
      if (cr.table == node.relation) node.column_set.insert(cr);
  }

  std::size_t self = tree.nodes.size();
  tree.nodes.push_back(node);
  if (doc.contains("children")) {
    if (!doc["children"].is_array()) throw IngestError("plan node children must be an array");
    for (const auto& child : doc["children"]) {
      tree.nodes[self].children.push_back(static_cast<int>(tree.nodes.size()));
      ingest_node(child, tree, referenced_columns);
    }
  }
}

}  // namespace detail

// Structure-only hash over the pre-order (operator, child-count) sequence.
// Costs are excluded so reruns of the same shape share a fingerprint.
inline std::string plan_fingerprint(const PlanTree& tree) {
  std::string seq;
  for (const auto& n : tree.nodes) {
    seq += operator_name(n.op);
    seq += '/';
    seq += std::to_string(n.children.size());
    seq += ';';
  }
  return to_hex16(fnv1a64(seq));
}

/// Builds a PlanTree from a plan document. `referenced_columns` is the owning
/// query's column list; scan nodes annotated with only a relation pick up all
/// referenced columns of that table as their S(p).
inline PlanTree ingest_plan(const nlohmann::json& doc,
                            const std::vector<ColumnRef>& referenced_columns = {},
                            const std::string& plan_id = "") {
  if (doc.is_array()) throw IngestError("plan document has multiple roots");
  PlanTree tree;
  tree.plan_id = plan_id;
  tree.root = 0;
  detail::ingest_node(doc, tree, referenced_columns);
  tree.fingerprint = plan_fingerprint(tree);
  return tree;
}

inline PlanTree ingest_plan_text(const std::string& text,
                                 const std::vector<ColumnRef>& referenced_columns = {},
                                 const std::string& plan_id = "") {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw IngestError("plan document is not valid JSON");
  return ingest_plan(doc, referenced_columns, plan_id);
}

inline nlohmann::json serialize_plan_node(const PlanTree& tree, int node_id) {
  const PlanNode& n = tree.node(node_id);
  nlohmann::json doc;
  doc["node_type"] = n.op_name;
  doc["cost"] = n.est_cost;
  doc["rows"] = n.est_rows;
  if (!n.relation.empty()) doc["relation"] = n.relation;
  if (!n.column_set.empty()) {
    auto cols = nlohmann::json::array();
    for (const auto& c : n.column_set) cols.push_back(c.qualified());
    doc["columns"] = cols;
  }
  if (!n.children.empty()) {
    auto kids = nlohmann::json::array();
    for (int child : n.children) kids.push_back(serialize_plan_node(tree, child));
    doc["children"] = kids;
  }
  return doc;
}

inline nlohmann::json serialize_plan(const PlanTree& tree) {
  return serialize_plan_node(tree, tree.root);
}

inline double total_cost(const PlanTree& tree) {
  double sum = 0.0;
  for (const auto& n : tree.nodes) sum += n.est_cost;
  return sum;
}

inline double total_rows(const PlanTree& tree) {
  double sum = 0.0;
  for (const auto& n : tree.nodes) sum += n.est_rows;
  return sum;
}

}  // namespace ontotune
