#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontotune/common.hpp"
#include "ontotune/feature_embed.hpp"
#include "ontotune/plan_model.hpp"
#include "ontotune/sql_parser.hpp"
#include "ontotune/types.hpp"

namespace ontotune {

/// One replayable workload unit: ground-truth runtime and plan per arm, plus
/// the optimizer-estimated-best arm used during cold start.
struct TraceEntry {
  std::string query_id;
  std::string template_id;
  std::string sql_text;
  std::vector<double> runtimes_ms;        // indexed by arm id
  std::vector<nlohmann::json> plan_docs;  // indexed by arm id
  int est_best_arm = 0;
};

struct TraceBundle {
  std::string name;  // trace file stem, used as the dataset tag
  std::vector<TraceEntry> entries;
  int arm_count = 0;
  std::vector<ArmSpec> arms;
  Catalog catalog;
};

namespace detail {

inline std::vector<ArmSpec> default_arms(int arm_count) {
  std::vector<ArmSpec> arms;
  for (int k = 0; k < arm_count; ++k)
    arms.push_back({k, k == 0 ? "default" : "arm" + std::to_string(k), {}});
  return arms;
}

template <typename T>
inline std::vector<T> arm_indexed(const nlohmann::json& obj, int arm_count,
                                  const std::string& query_id, const std::string& what) {
  if (!obj.is_object()) throw TraceError("query " + query_id + ": " + what + " must be an object");
  std::vector<T> out(static_cast<std::size_t>(arm_count));
  std::vector<bool> seen(static_cast<std::size_t>(arm_count), false);
  for (const auto& [key, value] : obj.items()) {
    int arm = -1;
    try {
      arm = std::stoi(key);
    } catch (const std::exception&) {
      throw TraceError("query " + query_id + ": " + what + " has non-numeric arm key '" + key + "'");
    }
    if (arm < 0 || arm >= arm_count)
      throw TraceError("query " + query_id + ": " + what + " names arm " + key +
                       " outside [0," + std::to_string(arm_count) + ")");
    out[static_cast<std::size_t>(arm)] = value.template get<T>();
    seen[static_cast<std::size_t>(arm)] = true;
  }
  for (int a = 0; a < arm_count; ++a)
    if (!seen[static_cast<std::size_t>(a)])
      throw TraceError("query " + query_id + ": " + what + " missing arm " + std::to_string(a));
  return out;
}

}  // namespace detail

/// Loads and fully validates a trace: every entry must cover all K arms, all
/// plans must ingest, all SQL must parse, and no query may reference more
/// than `max_columns` columns. Side-files <stem>.arms.json and
/// <stem>.catalog.json supply arm specs and column traits when present.
inline TraceBundle load_trace(const std::filesystem::path& path, std::size_t max_columns = 32) {
  if (!std::filesystem::exists(path))
    throw ConfigError("trace file does not exist: " + path.string());
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());

  TraceBundle bundle;
  bundle.name = path.stem().string();

  // First pass: raw JSON lines.
  std::vector<nlohmann::json> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded())
      throw TraceError("trace " + path.string() + " line " + std::to_string(lineno) +
                       ": invalid JSON");
    lines.push_back(std::move(doc));
  }
  if (lines.empty()) throw TraceError("trace " + path.string() + " is empty");

  // Arm count is the size of the first entry's runtime map; every entry must
  // cover exactly that dense arm range.
  if (!lines.front().contains("runtimes_ms"))
    throw TraceError("trace " + path.string() + ": first entry lacks runtimes_ms");
  bundle.arm_count = static_cast<int>(lines.front()["runtimes_ms"].size());
  if (bundle.arm_count < 1)
    throw TraceError("trace " + path.string() + ": entries carry no runtimes");

  std::set<std::string> query_ids;
  for (const auto& doc : lines) {
    TraceEntry e;
    try {
      e.query_id = doc.at("query_id").get<std::string>();
      e.template_id = doc.at("template_id").get<std::string>();
      e.sql_text = doc.at("sql").get<std::string>();
      e.est_best_arm = doc.at("est_best_arm").get<int>();
    } catch (const nlohmann::json::exception& ex) {
      throw TraceError("trace " + path.string() + ": malformed entry (" + std::string(ex.what()) + ")");
    }
    if (!query_ids.insert(e.query_id).second)
      throw TraceError("trace " + path.string() + ": duplicate query_id " + e.query_id);
    if (e.est_best_arm < 0 || e.est_best_arm >= bundle.arm_count)
      throw TraceError("query " + e.query_id + ": est_best_arm " + std::to_string(e.est_best_arm) +
                       " outside [0," + std::to_string(bundle.arm_count) + ")");
    e.runtimes_ms = detail::arm_indexed<double>(doc.at("runtimes_ms"), bundle.arm_count,
                                                e.query_id, "runtimes_ms");
    for (double r : e.runtimes_ms)
      if (!(r > 0.0))
        throw TraceError("query " + e.query_id + ": runtimes must be positive");
    e.plan_docs = detail::arm_indexed<nlohmann::json>(doc.at("plans"), bundle.arm_count,
                                                      e.query_id, "plans");

    ParsedQuery pq;
    try {
      pq = parse_sql_subset(e.sql_text);
    } catch (const ParseError& ex) {
      throw TraceError("query " + e.query_id + ": " + ex.what());
    }
    if (pq.columns.empty())
      throw TraceError("query " + e.query_id + " references no columns; a query with plans must");
    if (pq.columns.size() > max_columns)
      throw TraceError("query " + e.query_id + " references " + std::to_string(pq.columns.size()) +
                       " columns, capacity is " + std::to_string(max_columns));
    for (int a = 0; a < bundle.arm_count; ++a) {
      try {
        ingest_plan(e.plan_docs[static_cast<std::size_t>(a)], pq.column_list());
      } catch (const IngestError& ex) {
        throw TraceError("query " + e.query_id + ", arm " + std::to_string(a) + ": " + ex.what());
      }
    }
    bundle.entries.push_back(std::move(e));
  }

  auto arms_path = path.parent_path() / (path.stem().string() + ".arms.json");
  if (std::filesystem::exists(arms_path)) {
    std::ifstream af(arms_path);
    nlohmann::json doc = nlohmann::json::parse(af, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
      throw TraceError("arms side-file is not a JSON array: " + arms_path.string());
    for (const auto& a : doc) {
      ArmSpec spec;
      spec.arm_id = a.at("arm_id").get<int>();
      spec.name = a.at("name").get<std::string>();
      if (a.contains("settings"))
        spec.settings = a["settings"].get<std::map<std::string, std::string>>();
      bundle.arms.push_back(spec);
    }
    if (bundle.arms.size() != static_cast<std::size_t>(bundle.arm_count))
      throw TraceError("arms side-file lists " + std::to_string(bundle.arms.size()) +
                       " arms, trace uses " + std::to_string(bundle.arm_count));
    for (int k = 0; k < bundle.arm_count; ++k)
      if (bundle.arms[static_cast<std::size_t>(k)].arm_id != k)
        throw TraceError("arms side-file ids must be dense 0.." +
                         std::to_string(bundle.arm_count - 1));
  } else {
    bundle.arms = detail::default_arms(bundle.arm_count);
  }

  auto catalog_path = path.parent_path() / (path.stem().string() + ".catalog.json");
  if (std::filesystem::exists(catalog_path)) {
    std::ifstream cf(catalog_path);
    nlohmann::json doc = nlohmann::json::parse(cf, nullptr, false);
    if (doc.is_discarded())
      throw TraceError("catalog side-file is not valid JSON: " + catalog_path.string());
    bundle.catalog = catalog_from_json(doc);
  }
  return bundle;
}

/// Best-case total: sum over one pass of the per-query minimum arm runtime.
inline double oracle_runtime(const TraceBundle& trace) {
  double total = 0.0;
  for (const auto& e : trace.entries)
    total += *std::min_element(e.runtimes_ms.begin(), e.runtimes_ms.end());
  return total;
}

}  // namespace ontotune
