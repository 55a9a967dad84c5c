#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "ontotune/kg_store.hpp"

using namespace ontotune;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ontotune_store_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

QueryRecord sample_query(const std::string& id, const std::string& tpl = "t1") {
  QueryRecord q;
  q.query_id = id;
  q.sql_text = "SELECT a.x FROM t a";
  q.template_id = tpl;
  q.referenced_tables = {"t"};
  q.referenced_columns = {{"t", "x"}};
  return q;
}

PlanTree sample_plan(const std::string& plan_id, const std::string& query_id) {
  PlanTree p = ingest_plan_text(
      R"({"node_type":"HashJoin","cost":5.0,"rows":2.0,"children":[
           {"node_type":"SeqScan","cost":3.0,"rows":10.0,"columns":["t.x"]},
           {"node_type":"SeqScan","cost":2.0,"rows":7.0}]})",
      {}, plan_id);
  p.query_id = query_id;
  return p;
}

ExecutionRecord sample_exec(const std::string& exec_id, const std::string& query_id, int arm,
                            int batch) {
  ExecutionRecord x;
  x.exec_id = exec_id;
  x.query_id = query_id;
  x.arm_id = arm;
  x.plan_fingerprint = "fp";
  x.env_id = "sim";
  x.batch_index = batch;
  x.runtime_ms = 12.5;
  return x;
}

}  // namespace

TEST_CASE("put then get round-trips every type", "[store]") {
  KgStore store;
  CHECK(store.put(ArmSpec{0, "default", {}}) == "arm/0");
  CHECK(store.put(ArmSpec{1, "no_hash", {{"enable_hashjoin", "off"}}}) == "arm/1");
  store.put(EnvironmentSnapshot{"sim", {{"work_mem", "4MB"}}, "synthetic", "desk"});

  QueryRecord q = sample_query("q1");
  CHECK(store.put(q) == "query/q1");
  const QueryRecord& back = store.get_query("q1");
  CHECK(back.sql_text == q.sql_text);
  CHECK(back.referenced_columns == q.referenced_columns);
  CHECK(back.template_id == q.template_id);

  PlanTree p = sample_plan("q1/arm0", "q1");
  store.put(p);
  CHECK(store.get_plan("q1/arm0").fingerprint == p.fingerprint);

  ExecutionRecord x = sample_exec("e1", "q1", 1, 0);
  x.predicted_reward = 0.25;
  store.put(x);
  const ExecutionRecord& xe = store.get_execution("e1");
  CHECK(xe.runtime_ms == 12.5);
  CHECK(xe.predicted_reward == 0.25);
  CHECK_FALSE(xe.realized_reward.has_value());
  CHECK(store.get_arm(1).settings.at("enable_hashjoin") == "off");
}

TEST_CASE("invariant violations are rejected", "[store]") {
  KgStore store;
  store.put(ArmSpec{0, "default", {}});

  ExecutionRecord bad = sample_exec("e1", "q1", 0, 0);
  bad.runtime_ms = -1.0;
  CHECK_THROWS_AS(store.put(bad), ValidationError);

  ExecutionRecord bad_reward = sample_exec("e2", "q1", 0, 0);
  bad_reward.predicted_reward = 1.5;
  CHECK_THROWS_AS(store.put(bad_reward), ValidationError);

  CHECK_THROWS_AS(store.put(ArmSpec{5, "gap", {}}), ValidationError);  // not dense
  KgStore store2;
  CHECK_THROWS_AS(store2.put(ArmSpec{0, "default", {{"work_mem", "1GB"}}}), ValidationError);

  QueryRecord dup_col = sample_query("qq");
  dup_col.referenced_columns = {{"t", "x"}, {"t", "x"}};
  CHECK_THROWS_AS(store.put(dup_col), ValidationError);

  PlanTree cyclic = sample_plan("p-cycle", "");
  cyclic.nodes[2].children.push_back(0);  // edge back to the root
  CHECK_THROWS_AS(store.put(cyclic), ValidationError);
}

TEST_CASE("duplicate ids and duplicate execution keys conflict", "[store]") {
  KgStore store;
  store.put(sample_query("q1"));
  CHECK_THROWS_AS(store.put(sample_query("q1")), ConflictError);

  store.put(sample_exec("e1", "q1", 2, 0));
  CHECK_THROWS_AS(store.put(sample_exec("e2", "q1", 2, 0)), ConflictError);  // same key
  CHECK(store.put(sample_exec("e2", "q1", 2, 1)) == "exec/e2");
  CHECK(store.execution_count() == 2);
}

TEST_CASE("execution filters honor template and batch ranges", "[store]") {
  KgStore store;
  CHECK(store.query_executions({.arm_id = 3}).empty());

  store.put(sample_query("q1", "t1"));
  store.put(sample_query("q2", "t2"));
  int next = 0;
  for (int batch = 0; batch < 3; ++batch)
    for (int i = 0; i < 4; ++i) {
      const std::string qid = (i % 2 == 0) ? "q1" : "q2";
      store.put(sample_exec("e" + std::to_string(next++), qid, i, batch));
    }

  auto t1 = store.query_executions({.template_id = "t1"});
  CHECK(t1.size() == 6);
  for (std::size_t i = 1; i < t1.size(); ++i) CHECK(t1[i - 1].timestamp < t1[i].timestamp);

  auto batch2 = store.query_executions({.batch_lo = 2, .batch_hi = 2});
  CHECK(batch2.size() == 4);
  CHECK(store.query_executions({.query_id = "q1", .arm_id = 0}).size() == 3);
}

TEST_CASE("five records for one template come back in insertion order", "[store]") {
  KgStore store;
  store.put(sample_query("q1", "t1"));
  for (int i = 0; i < 5; ++i) store.put(sample_exec("e" + std::to_string(i), "q1", i, 0));
  auto got = store.query_executions({.template_id = "t1"});
  REQUIRE(got.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(got[static_cast<std::size_t>(i)].exec_id == "e" + std::to_string(i));
}

TEST_CASE("triple export counts and determinism", "[store]") {
  KgStore store;
  CHECK(store.export_triples().empty());

  store.put(ArmSpec{0, "default", {}});
  store.put(EnvironmentSnapshot{"sim", {}, "synthetic", "desk"});
  store.put(sample_query("q1"));
  store.put(sample_plan("q1/arm0", "q1"));
  auto exec = sample_exec("e1", "q1", 0, 0);
  exec.realized_reward = 0.5;
  store.put(exec);

  auto triples = store.export_triples();
  auto count = [&](const std::string& pred) {
    return std::count_if(triples.begin(), triples.end(),
                         [&](const Triple& t) { return t.predicate == pred; });
  };
  CHECK(count("hasPlan") == 1);
  CHECK(count("hasNode") == 3);
  CHECK(count("useArm") == 1);
  CHECK(count("hasExecution") == 1);
  CHECK(count("inEnvironment") == 1);
  CHECK(count("hasReward") == 1);
  CHECK(count("referencesColumn") == 1);
  CHECK(count("referencesTable") == 1);

  CHECK(KgStore::triples_to_text(store.export_triples()) == KgStore::triples_to_text(triples));
  CHECK(store.integrity_scan().empty());
}

TEST_CASE("integrity scan flags dangling references", "[store]") {
  KgStore store;
  store.put(sample_query("q1"));
  store.put(sample_exec("e1", "q1", 7, 0));  // arm 7 never stored
  auto problems = store.integrity_scan();
  REQUIRE_FALSE(problems.empty());
  CHECK(problems[0].find("useArm") != std::string::npos);
}

TEST_CASE("store persists and reloads from its append-only log", "[store]") {
  TempDir tmp;
  const fs::path file = tmp.path / "store.ndjson";
  {
    KgStore store = KgStore::open(file);
    store.put(ArmSpec{0, "default", {}});
    store.put(EnvironmentSnapshot{"sim", {}, "synthetic", "desk"});
    store.put(sample_query("q1"));
    store.put(sample_plan("q1/arm0", "q1"));
    auto exec = sample_exec("e1", "q1", 0, 0);
    exec.realized_reward = 0.25;
    store.put(exec);
  }
  KgStore again = KgStore::open(file);
  CHECK(again.query_count() == 1);
  CHECK(again.plan_count() == 1);
  CHECK(again.execution_count() == 1);
  CHECK(again.get_execution("e1").realized_reward == 0.25);
  CHECK(again.get_plan("q1/arm0").nodes.size() == 3);

  // appends continue after the highest persisted timestamp
  again.put(sample_exec("e2", "q1", 1, 0));
  CHECK(again.get_execution("e2").timestamp > again.get_execution("e1").timestamp);

  // reload and compare the exports byte for byte
  KgStore third = KgStore::open(file);
  CHECK(KgStore::triples_to_text(third.export_triples()) ==
        KgStore::triples_to_text(again.export_triples()));
}

TEST_CASE("a torn final line is dropped, interior damage is fatal", "[store]") {
  TempDir tmp;
  const fs::path file = tmp.path / "store.ndjson";
  {
    KgStore store = KgStore::open(file);
    store.put(sample_query("q1"));
    store.put(sample_query("q2"));
  }
  {
    std::ofstream out(file, std::ios::app);
    out << "{\"kind\":\"query\",\"bo";  // write cut short mid-record
  }
  KgStore recovered = KgStore::open(file);
  CHECK(recovered.query_count() == 2);

  const fs::path corrupt = tmp.path / "corrupt.ndjson";
  {
    std::ofstream out(corrupt);
    out << "garbage\n";
    out << R"({"kind":"arm","body":{"arm_id":0,"name":"default","settings":{}}})" << "\n";
  }
  CHECK_THROWS_AS(KgStore::open(corrupt), ValidationError);
}

TEST_CASE("a plan requires its owning query to reference columns", "[store]") {
  KgStore store;
  QueryRecord bare;
  bare.query_id = "q0";
  bare.sql_text = "SELECT 1";
  bare.template_id = "t0";
  store.put(bare);
  CHECK_THROWS_AS(store.put(sample_plan("q0/arm0", "q0")), ValidationError);
}
