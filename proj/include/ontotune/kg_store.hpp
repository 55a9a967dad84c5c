#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ontotune/common.hpp"
#include "ontotune/plan_model.hpp"
#include "ontotune/types.hpp"

namespace ontotune {

namespace kgjson {

inline nlohmann::json to_json(const QueryRecord& q) {
  nlohmann::json body;
  body["query_id"] = q.query_id;
  body["sql_text"] = q.sql_text;
  body["template_id"] = q.template_id;
  body["referenced_tables"] = q.referenced_tables;
  auto cols = nlohmann::json::array();
  for (const auto& c : q.referenced_columns) cols.push_back({{"table", c.table}, {"column", c.column}});
  body["referenced_columns"] = cols;
  return body;
}

inline QueryRecord query_from_json(const nlohmann::json& body) {
  QueryRecord q;
  q.query_id = body.at("query_id").get<std::string>();
  q.sql_text = body.at("sql_text").get<std::string>();
  q.template_id = body.at("template_id").get<std::string>();
  q.referenced_tables = body.at("referenced_tables").get<std::vector<std::string>>();
  for (const auto& c : body.at("referenced_columns"))
    q.referenced_columns.push_back({c.at("table").get<std::string>(), c.at("column").get<std::string>()});
  return q;
}

inline nlohmann::json to_json(const PlanTree& p) {
  nlohmann::json body;
  body["plan_id"] = p.plan_id;
  body["query_id"] = p.query_id;
  body["fingerprint"] = p.fingerprint;
  body["root"] = p.root;
  body["tree"] = serialize_plan(p);
  return body;
}

inline PlanTree plan_from_json(const nlohmann::json& body) {
  PlanTree p = ingest_plan(body.at("tree"), {}, body.at("plan_id").get<std::string>());
  p.query_id = body.at("query_id").get<std::string>();
  return p;
}

inline nlohmann::json to_json(const ArmSpec& a) {
  return {{"arm_id", a.arm_id}, {"name", a.name}, {"settings", a.settings}};
}

inline ArmSpec arm_from_json(const nlohmann::json& body) {
  ArmSpec a;
  a.arm_id = body.at("arm_id").get<int>();
  a.name = body.at("name").get<std::string>();
  a.settings = body.at("settings").get<std::map<std::string, std::string>>();
  return a;
}

inline nlohmann::json to_json(const EnvironmentSnapshot& e) {
  return {{"env_id", e.env_id},
          {"settings", e.settings},
          {"dataset_tag", e.dataset_tag},
          {"hardware_tag", e.hardware_tag}};
}

inline EnvironmentSnapshot env_from_json(const nlohmann::json& body) {
  EnvironmentSnapshot e;
  e.env_id = body.at("env_id").get<std::string>();
  e.settings = body.at("settings").get<std::map<std::string, std::string>>();
  e.dataset_tag = body.at("dataset_tag").get<std::string>();
  e.hardware_tag = body.at("hardware_tag").get<std::string>();
  return e;
}

inline nlohmann::json to_json(const ExecutionRecord& x) {
  nlohmann::json body;
  body["exec_id"] = x.exec_id;
  body["query_id"] = x.query_id;
  body["arm_id"] = x.arm_id;
  body["plan_fingerprint"] = x.plan_fingerprint;
  body["env_id"] = x.env_id;
  body["batch_index"] = x.batch_index;
  body["runtime_ms"] = x.runtime_ms;
  body["timestamp"] = x.timestamp;
  if (x.predicted_reward) body["predicted_reward"] = *x.predicted_reward;
  if (x.realized_reward) body["realized_reward"] = *x.realized_reward;
  return body;
}

inline ExecutionRecord exec_from_json(const nlohmann::json& body) {
  ExecutionRecord x;
  x.exec_id = body.at("exec_id").get<std::string>();
  x.query_id = body.at("query_id").get<std::string>();
  x.arm_id = body.at("arm_id").get<int>();
  x.plan_fingerprint = body.at("plan_fingerprint").get<std::string>();
  x.env_id = body.at("env_id").get<std::string>();
  x.batch_index = body.at("batch_index").get<int>();
  x.runtime_ms = body.at("runtime_ms").get<double>();
  x.timestamp = body.at("timestamp").get<std::uint64_t>();
  if (body.contains("predicted_reward")) x.predicted_reward = body["predicted_reward"].get<double>();
  if (body.contains("realized_reward")) x.realized_reward = body["realized_reward"].get<double>();
  return x;
}

}  // namespace kgjson

struct ExecutionFilter {
  std::optional<std::string> query_id;
  std::optional<std::string> template_id;
  std::optional<int> arm_id;
  std::optional<int> batch_lo;
  std::optional<int> batch_hi;
};

/// Append-only record store over one newline-delimited log: each line is a
/// tagged object {kind, body}. An in-memory index is rebuilt at open; records
/// are never mutated or deleted.
class KgStore {
public:
  KgStore() = default;  // in-memory only

  static KgStore open(const std::filesystem::path& path) {
    KgStore store;
    store.path_ = path;
    if (std::filesystem::exists(path)) {
      std::ifstream in(path);
      if (!in) throw IoError("cannot open store file " + path.string());
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.contains("kind") || !rec.contains("body")) {
          // a torn final line is a crash artifact and is dropped; damage
          // anywhere else is corruption
          if (in.peek() == std::char_traits<char>::eof()) break;
          throw ValidationError("store " + path.string() + " line " + std::to_string(lineno) +
                                ": not a tagged record");
        }
        store.index_record(rec["kind"].get<std::string>(), rec["body"], /*persist=*/false);
      }
    }
    store.out_.open(path, std::ios::app);
    if (!store.out_) throw IoError("cannot append to store file " + path.string());
    return store;
  }

  std::string put(const QueryRecord& q) {
    validate(q);
    const std::string id = "query/" + q.query_id;
    require_fresh(id);
    queries_.emplace(q.query_id, q);
    persist("query", kgjson::to_json(q));
    return id;
  }

  std::string put(const PlanTree& p) {
    validate(p);
    const std::string id = "plan/" + p.plan_id;
    require_fresh(id);
    plans_.emplace(p.plan_id, p);
    persist("plan", kgjson::to_json(p));
    return id;
  }

  std::string put(const ArmSpec& a) {
    validate(a);
    const std::string id = "arm/" + std::to_string(a.arm_id);
    require_fresh(id);
    arms_.emplace(a.arm_id, a);
    persist("arm", kgjson::to_json(a));
    return id;
  }

  std::string put(const EnvironmentSnapshot& e) {
    if (e.env_id.empty()) throw ValidationError("environment snapshot requires env_id");
    const std::string id = "env/" + e.env_id;
    require_fresh(id);
    envs_.emplace(e.env_id, e);
    persist("env", kgjson::to_json(e));
    return id;
  }

  std::string put(ExecutionRecord x) {
    validate(x);
    const std::string id = "exec/" + x.exec_id;
    auto key = std::make_tuple(x.query_id, x.arm_id, x.batch_index);
    if (exec_keys_.count(key))
      throw ConflictError("duplicate execution for (" + x.query_id + ", arm " +
                          std::to_string(x.arm_id) + ", batch " + std::to_string(x.batch_index) + ")");
    require_fresh(id);
    exec_keys_.insert(key);
    x.timestamp = next_timestamp_++;
    execs_.push_back(x);
    exec_ids_.insert(x.exec_id);
    persist("execution", kgjson::to_json(x));
    return id;
  }

  const QueryRecord& get_query(const std::string& query_id) const {
    auto it = queries_.find(query_id);
    if (it == queries_.end()) throw ValidationError("no such query: " + query_id);
    return it->second;
  }
  const PlanTree& get_plan(const std::string& plan_id) const {
    auto it = plans_.find(plan_id);
    if (it == plans_.end()) throw ValidationError("no such plan: " + plan_id);
    return it->second;
  }
  const ArmSpec& get_arm(int arm_id) const {
    auto it = arms_.find(arm_id);
    if (it == arms_.end()) throw ValidationError("no such arm: " + std::to_string(arm_id));
    return it->second;
  }
  const EnvironmentSnapshot& get_env(const std::string& env_id) const {
    auto it = envs_.find(env_id);
    if (it == envs_.end()) throw ValidationError("no such environment: " + env_id);
    return it->second;
  }
  const ExecutionRecord& get_execution(const std::string& exec_id) const {
    for (const auto& x : execs_)
      if (x.exec_id == exec_id) return x;
    throw ValidationError("no such execution: " + exec_id);
  }

  std::size_t query_count() const { return queries_.size(); }
  std::size_t plan_count() const { return plans_.size(); }
  std::size_t arm_count() const { return arms_.size(); }
  std::size_t env_count() const { return envs_.size(); }
  std::size_t execution_count() const { return execs_.size(); }

  const std::map<std::string, QueryRecord>& queries() const { return queries_; }
  const std::map<std::string, PlanTree>& plans() const { return plans_; }
  const std::map<int, ArmSpec>& arms() const { return arms_; }
  const std::vector<ExecutionRecord>& executions() const { return execs_; }

  std::vector<ExecutionRecord> query_executions(const ExecutionFilter& f) const {
    std::vector<ExecutionRecord> out;
    for (const auto& x : execs_) {
      if (f.query_id && x.query_id != *f.query_id) continue;
      if (f.arm_id && x.arm_id != *f.arm_id) continue;
      if (f.batch_lo && x.batch_index < *f.batch_lo) continue;
      if (f.batch_hi && x.batch_index > *f.batch_hi) continue;
      if (f.template_id) {
        auto it = queries_.find(x.query_id);
        if (it == queries_.end() || it->second.template_id != *f.template_id) continue;
      }
      out.push_back(x);
    }
    return out;  // execs_ is already in timestamp order
  }

  std::vector<Triple> export_triples() const {
    std::vector<Triple> out;
    for (const auto& [qid, q] : queries_) {
      for (const auto& t : std::set<std::string>(q.referenced_tables.begin(), q.referenced_tables.end()))
        out.push_back({"query/" + qid, "referencesTable", "table/" + t});
      for (const auto& c : q.referenced_columns)
        out.push_back({"query/" + qid, "referencesColumn", "column/" + c.qualified()});
    }
    for (const auto& [pid, p] : plans_) {
      if (!p.query_id.empty()) out.push_back({"query/" + p.query_id, "hasPlan", "plan/" + pid});
      for (const auto& n : p.nodes)
        out.push_back({"plan/" + pid, "hasNode", "node/" + pid + "#" + std::to_string(n.node_id)});
    }
    for (const auto& x : execs_) {
      out.push_back({"exec/" + x.exec_id, "useArm", "arm/" + std::to_string(x.arm_id)});
      out.push_back({"query/" + x.query_id, "hasExecution", "exec/" + x.exec_id});
      out.push_back({"exec/" + x.exec_id, "inEnvironment", "env/" + x.env_id});
      if (x.realized_reward)
        out.push_back({"exec/" + x.exec_id, "hasReward", format_double(*x.realized_reward)});
    }
    return out;
  }

  static std::string triples_to_text(const std::vector<Triple>& triples) {
    std::string out;
    for (const auto& t : triples) {
      out += t.subject;
      out += '\t';
      out += t.predicate;
      out += '\t';
      out += t.object;
      out += '\n';
    }
    return out;
  }

  /// Referential-integrity scan over the exported triples: every id-valued
  /// object must resolve against the store. Returns the list of violations.
  std::vector<std::string> integrity_scan() const {
    std::vector<std::string> problems;
    for (const Triple& t : export_triples()) {
      if (t.predicate == "useArm") {
        int arm = std::stoi(t.object.substr(4));
        if (!arms_.count(arm)) problems.push_back("useArm -> missing " + t.object);
      } else if (t.predicate == "hasPlan") {
        if (!plans_.count(t.object.substr(5))) problems.push_back("hasPlan -> missing " + t.object);
        if (!queries_.count(t.subject.substr(6))) problems.push_back("hasPlan <- missing " + t.subject);
      } else if (t.predicate == "hasNode") {
        auto hash = t.object.find('#');
        std::string pid = t.object.substr(5, hash - 5);
        if (!plans_.count(pid)) problems.push_back("hasNode -> missing plan " + pid);
      } else if (t.predicate == "hasExecution") {
        if (!queries_.count(t.subject.substr(6))) problems.push_back("hasExecution <- missing " + t.subject);
        if (!exec_ids_.count(t.object.substr(5))) problems.push_back("hasExecution -> missing " + t.object);
      } else if (t.predicate == "inEnvironment") {
        if (!envs_.count(t.object.substr(4))) problems.push_back("inEnvironment -> missing " + t.object);
      } else if (t.predicate == "hasReward") {
        double r = std::stod(t.object);
        if (!(r >= 0.0 && r <= 1.0)) problems.push_back("hasReward out of range: " + t.object);
      } else if (t.predicate == "referencesColumn") {
        const QueryRecord& q = get_query(t.subject.substr(6));
        bool found = false;
        for (const auto& c : q.referenced_columns)
          if ("column/" + c.qualified() == t.object) found = true;
        if (!found) problems.push_back("referencesColumn -> unlisted " + t.object);
      }
    }
    return problems;
  }

private:
  void require_fresh(const std::string& id) {
    if (!all_ids_.insert(id).second) throw ConflictError("duplicate record id: " + id);
  }

  void validate(const QueryRecord& q) const {
    if (q.query_id.empty()) throw ValidationError("query record requires query_id");
    std::set<ColumnRef> seen;
    for (const auto& c : q.referenced_columns)
      if (!seen.insert(c).second)
        throw ValidationError("query " + q.query_id + ": duplicate referenced column " + c.qualified());
  }

  void validate(const PlanTree& p) const {
    if (p.plan_id.empty()) throw ValidationError("plan requires plan_id");
    if (p.nodes.empty()) throw ValidationError("plan " + p.plan_id + " has no nodes");
    std::set<int> ids;
    std::map<int, int> referenced;
    for (const auto& n : p.nodes) {
      if (!ids.insert(n.node_id).second)
        throw ValidationError("plan " + p.plan_id + ": duplicate node id " + std::to_string(n.node_id));
      if (n.est_cost < 0.0 || n.est_rows < 0.0)
        throw ValidationError("plan " + p.plan_id + ": negative cost or rows");
      for (int c : n.children) ++referenced[c];
    }
    for (const auto& [id, count] : referenced) {
      if (!ids.count(id))
        throw ValidationError("plan " + p.plan_id + ": dangling child id " + std::to_string(id));
      if (count > 1 || id == p.root)
        throw ValidationError("plan " + p.plan_id + ": node " + std::to_string(id) +
                              " is not tree-shaped");
    }
    // every node must be reachable from the single root
    std::set<int> reached;
    std::vector<int> stack{p.root};
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      if (!reached.insert(id).second)
        throw ValidationError("plan " + p.plan_id + ": cycle through node " + std::to_string(id));
      for (int c : p.node(id).children) stack.push_back(c);
    }
    if (reached.size() != p.nodes.size())
      throw ValidationError("plan " + p.plan_id + ": has nodes unreachable from root");
    if (plan_fingerprint(p) != p.fingerprint)
      throw ValidationError("plan " + p.plan_id + ": fingerprint does not match structure");
    if (!p.query_id.empty()) {
      auto it = queries_.find(p.query_id);
      if (it != queries_.end() && it->second.referenced_columns.empty())
        throw ValidationError("query " + p.query_id + " has a plan but no referenced columns");
    }
  }

  void validate(const ArmSpec& a) const {
    if (a.arm_id < 0) throw ValidationError("arm_id must be nonnegative");
    if (static_cast<std::size_t>(a.arm_id) != arms_.size())
      throw ValidationError("arm ids must be dense: expected " + std::to_string(arms_.size()) +
                            ", got " + std::to_string(a.arm_id));
    if (a.arm_id == 0 && !a.settings.empty())
      throw ValidationError("arm 0 is the all-defaults arm and must carry no settings");
  }

  void validate(const ExecutionRecord& x) const {
    if (x.exec_id.empty()) throw ValidationError("execution requires exec_id");
    if (!(x.runtime_ms > 0.0))
      throw ValidationError("execution " + x.exec_id + ": runtime_ms must be positive, got " +
                            format_double(x.runtime_ms));
    for (const auto& r : {x.predicted_reward, x.realized_reward})
      if (r && !(*r >= 0.0 && *r <= 1.0))
        throw ValidationError("execution " + x.exec_id + ": reward outside [0,1]");
  }

  void persist(const std::string& kind, const nlohmann::json& body) {
    if (!out_.is_open()) return;
    nlohmann::json rec;
    rec["kind"] = kind;
    rec["body"] = body;
    out_ << rec.dump() << '\n';
    out_.flush();
  }

  void index_record(const std::string& kind, const nlohmann::json& body, bool persist) {
    (void)persist;
    if (kind == "query") {
      QueryRecord q = kgjson::query_from_json(body);
      all_ids_.insert("query/" + q.query_id);
      queries_.emplace(q.query_id, std::move(q));
    } else if (kind == "plan") {
      PlanTree p = kgjson::plan_from_json(body);
      all_ids_.insert("plan/" + p.plan_id);
      plans_.emplace(p.plan_id, std::move(p));
    } else if (kind == "arm") {
      ArmSpec a = kgjson::arm_from_json(body);
      all_ids_.insert("arm/" + std::to_string(a.arm_id));
      arms_.emplace(a.arm_id, std::move(a));
    } else if (kind == "env") {
      EnvironmentSnapshot e = kgjson::env_from_json(body);
      all_ids_.insert("env/" + e.env_id);
      envs_.emplace(e.env_id, std::move(e));
    } else if (kind == "execution") {
      ExecutionRecord x = kgjson::exec_from_json(body);
      all_ids_.insert("exec/" + x.exec_id);
      exec_ids_.insert(x.exec_id);
      exec_keys_.insert(std::make_tuple(x.query_id, x.arm_id, x.batch_index));
      next_timestamp_ = std::max(next_timestamp_, x.timestamp + 1);
      execs_.push_back(std::move(x));
    } else {
      throw ValidationError("unknown record kind '" + kind + "' in store");
    }
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::map<std::string, QueryRecord> queries_;
  std::map<std::string, PlanTree> plans_;
  std::map<int, ArmSpec> arms_;
  std::map<std::string, EnvironmentSnapshot> envs_;
  std::vector<ExecutionRecord> execs_;
  std::set<std::string> all_ids_;
  std::set<std::string> exec_ids_;
  std::set<std::tuple<std::string, int, int>> exec_keys_;
  std::uint64_t next_timestamp_ = 0;
};

}  // namespace ontotune
