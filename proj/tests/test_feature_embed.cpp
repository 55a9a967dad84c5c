#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "ontotune/checks.hpp"
#include "ontotune/feature_embed.hpp"
#include "support/oracles.hpp"

using namespace ontotune;
using Catch::Approx;

namespace {

PlanTree make_plan(std::vector<PlanNode> nodes) {
  PlanTree plan;
  plan.nodes = std::move(nodes);
  plan.root = 0;
  plan.fingerprint = plan_fingerprint(plan);
  return plan;
}

ColumnUniverse universe_of(std::vector<ColumnRef> cols) {
  std::set<ColumnRef> s(cols.begin(), cols.end());
  ColumnUniverse u;
  u.columns.assign(s.begin(), s.end());
  return u;
}

}  // namespace

TEST_CASE("column universe is sorted and duplicate-free", "[embed]") {
  ParsedQuery pq;
  pq.columns = {{"t", "b"}, {"t", "a"}, {"s", "z"}};
  auto u = build_column_universe(pq);
  CHECK(u.columns == std::vector<ColumnRef>{{"s", "z"}, {"t", "a"}, {"t", "b"}});

  ParsedQuery empty;
  CHECK(build_column_universe(empty).size() == 0);
}

TEST_CASE("plan shares match the direct formula", "[embed]") {
  ColumnRef u1{"t", "a"}, u2{"t", "b"};
  auto plan = make_plan({
      PlanNode{0, OperatorType::HashJoin, "HashJoin", 30.0, 10.0, {1}, {u1}, ""},
      PlanNode{1, OperatorType::SeqScan, "SeqScan", 70.0, 90.0, {}, {u2}, ""},
  });
  auto shares = compute_plan_shares(plan, universe_of({u1, u2}));
  CHECK(shares.cost_share[0] == Approx(0.3).epsilon(1e-12));
  CHECK(shares.cost_share[1] == Approx(0.7).epsilon(1e-12));
  CHECK_FALSE(shares.cost_degenerate);
}

TEST_CASE("a node covering every column gives all columns its full share", "[embed]") {
  ColumnRef u1{"t", "a"}, u2{"t", "b"};
  auto plan = make_plan({
      PlanNode{0, OperatorType::SeqScan, "SeqScan", 50.0, 10.0, {}, {u1, u2}, ""},
  });
  auto shares = compute_plan_shares(plan, universe_of({u1, u2}));
  // shares need not sum to 1 across columns
  CHECK(shares.cost_share[0] == 1.0);
  CHECK(shares.cost_share[1] == 1.0);
}

TEST_CASE("empty column sets contribute nowhere, zero totals degenerate", "[embed]") {
  ColumnRef u1{"t", "a"};
  auto plan = make_plan({
      PlanNode{0, OperatorType::Sort, "Sort", 10.0, 0.0, {1}, {}, ""},
      PlanNode{1, OperatorType::SeqScan, "SeqScan", 0.0, 0.0, {}, {u1}, ""},
  });
  auto shares = compute_plan_shares(plan, universe_of({u1}));
  CHECK(shares.cost_share[0] == 0.0);
  CHECK(shares.rows_degenerate);
  CHECK(shares.rows_share[0] == 0.0);
}

TEST_CASE("operator shares partition the total cost", "[embed]") {
  ColumnRef u1{"t", "a"};
  auto plan = make_plan({
      PlanNode{0, OperatorType::HashJoin, "HashJoin", 40.0, 1.0, {1}, {}, ""},
      PlanNode{1, OperatorType::SeqScan, "SeqScan", 60.0, 1.0, {}, {u1}, ""},
  });
  auto os = compute_operator_shares(plan, universe_of({u1}));
  CHECK(os.share[static_cast<int>(OperatorType::HashJoin)] == Approx(0.4).epsilon(1e-12));
  CHECK(os.share[static_cast<int>(OperatorType::Sort)] == 0.0);
  CHECK(os.scan_cost_share[0] == Approx(0.6).epsilon(1e-12));
  double sum = 0.0;
  for (double v : os.share) sum += v;
  CHECK(sum == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("scatter implementation equals gather oracle on random plans", "[embed][property]") {
  Rng rng(777);
  for (int trial = 0; trial < 200; ++trial) {
    PlanTree plan = checkdetail::random_plan(rng, false);
    ColumnUniverse u = checkdetail::universe_of(plan);
    auto shares = compute_plan_shares(plan, u);
    auto ops = compute_operator_shares(plan, u);
    for (std::size_t c = 0; c < u.size(); ++c) {
      REQUIRE(shares.cost_share[c] ==
              Approx(testing::gather_cost_share(plan, u.columns[c])).margin(1e-12));
      REQUIRE(shares.rows_share[c] ==
              Approx(testing::gather_rows_share(plan, u.columns[c])).margin(1e-12));
    }
    for (int k = 0; k < kOperatorTypeCount; ++k)
      REQUIRE(ops.share[static_cast<std::size_t>(k)] ==
              Approx(testing::gather_operator_share(plan, static_cast<OperatorType>(k)))
                  .margin(1e-12));
  }
}

TEST_CASE("share channels ignore a global cost scale", "[embed][property]") {
  Rng rng(778);
  for (int trial = 0; trial < 50; ++trial) {
    PlanTree plan = checkdetail::random_plan(rng, false);
    ColumnUniverse u = checkdetail::universe_of(plan);
    auto base = compute_plan_shares(plan, u);
    PlanTree scaled = plan;
    const double factor = 1e-3 + 1e4 * rng.uniform01();
    for (auto& n : scaled.nodes) n.est_cost *= factor;
    auto after = compute_plan_shares(scaled, u);
    for (std::size_t c = 0; c < u.size(); ++c)
      REQUIRE(after.cost_share[c] ==
              Approx(base.cost_share[c]).epsilon(1e-12).margin(1e-300));
  }
}

TEST_CASE("matrix assembly broadcasts template channels", "[embed]") {
  auto pq = parse_sql_subset("SELECT DISTINCT a.x, a.y, a.z FROM t a");
  auto tf = extract_template_features(pq);
  auto u = build_column_universe(pq);
  auto m = assemble_matrix(tf, pq, nullptr, u);
  REQUIRE(m.cols == 3);
  REQUIRE(m.rows == registry_rows());
  int row = channel_row("tpl_has_distinct");
  CHECK(m.at(row, 0) == 1.0);
  CHECK(m.at(row, 1) == 1.0);
  CHECK(m.at(row, 2) == 1.0);

  // plan absent: every plan-derived row is zero, template rows still set
  for (const char* name : {"plan_cost_share", "plan_rows_share", "plan_cost_op_SeqScan_share"}) {
    int r = channel_row(name);
    for (std::size_t c = 0; c < m.cols; ++c) CHECK(m.at(r, c) == 0.0);
  }
  int mask = channel_row("is_real_column");
  for (std::size_t c = 0; c < m.cols; ++c) CHECK(m.at(mask, c) == 1.0);

  ParsedQuery other = parse_sql_subset("SELECT b.q FROM s b");
  CHECK_THROWS_AS(assemble_matrix(tf, other, nullptr, u), ValidationError);
}

TEST_CASE("degenerate query produces a zero-column matrix", "[embed]") {
  auto pq = parse_sql_subset("SELECT 1");
  auto u = build_column_universe(pq);
  auto m = assemble_matrix(extract_template_features(pq), pq, nullptr, u);
  CHECK(m.cols == 0);
  auto padded = pad_to_shape(m, 8);
  CHECK(padded.cols == 8);
  for (double v : padded.values) CHECK(v == 0.0);
}

TEST_CASE("padding appends masked zero columns", "[embed]") {
  auto pq = parse_sql_subset("SELECT a.x, a.y, a.z FROM t a");
  auto u = build_column_universe(pq);
  auto m = assemble_matrix(extract_template_features(pq), pq, nullptr, u);
  auto padded = pad_to_shape(m, 5);
  CHECK(padded.cols == 5);
  int mask = channel_row("is_real_column");
  CHECK(padded.at(mask, 2) == 1.0);
  CHECK(padded.at(mask, 3) == 0.0);
  CHECK(padded.at(mask, 4) == 0.0);
  for (std::size_t r = 0; r < padded.rows; ++r) {
    CHECK(padded.at(r, 3) == 0.0);
    CHECK(padded.at(r, 4) == 0.0);
  }

  auto same = pad_to_shape(m, 3);
  CHECK(same.values == m.values);
  CHECK_THROWS_AS(pad_to_shape(m, 2), ValidationError);
}

TEST_CASE("assembly is deterministic", "[embed]") {
  auto pq = parse_sql_subset("SELECT a.x FROM t a WHERE a.x > 1");
  auto u = build_column_universe(pq);
  auto tf = extract_template_features(pq);
  auto m1 = assemble_matrix(tf, pq, nullptr, u);
  auto m2 = assemble_matrix(tf, pq, nullptr, u);
  CHECK(m1.values == m2.values);
}

TEST_CASE("full fixture matches the independently computed golden file", "[embed]") {
  const std::string sql =
      "SELECT DISTINCT p.owner FROM posts p JOIN votes v ON p.id = v.post_id ORDER BY p.owner";
  auto pq = parse_sql_subset(sql);
  auto u = build_column_universe(pq);
  REQUIRE(u.columns ==
          std::vector<ColumnRef>{{"posts", "id"}, {"posts", "owner"}, {"votes", "post_id"}});

  const char* plan_doc = R"({
    "node_type": "MergeJoin", "cost": 20.0, "rows": 2000.0,
    "columns": ["posts.id", "votes.post_id"],
    "children": [
      {"node_type": "SeqScan", "cost": 50.0, "rows": 1500.0, "relation": "posts"},
      {"node_type": "Sort", "cost": 10.0, "rows": 200.0, "columns": ["votes.post_id"],
       "children": [
         {"node_type": "IndexScan", "cost": 20.0, "rows": 200.0, "relation": "votes"}
       ]}
    ]
  })";
  auto plan = ingest_plan_text(plan_doc, pq.column_list());

  Catalog catalog;
  catalog.traits[{"posts", "id"}] = {true, true};
  catalog.traits[{"posts", "owner"}] = {false, true};
  catalog.traits[{"votes", "post_id"}] = {true, false};

  auto m = assemble_matrix(extract_template_features(pq, &plan), pq, &plan, u, catalog);

  std::ifstream golden(std::string(ONTOTUNE_GOLDEN_DIR) + "/golden_matrix.txt");
  REQUIRE(golden.good());
  std::string line;
  std::size_t row = 0;
  while (std::getline(golden, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    double expected;
    std::size_t col = 0;
    while (fields >> expected) {
      REQUIRE(row < m.rows);
      REQUIRE(col < m.cols);
      INFO("row " << row << " (" << channel_registry_v1()[row].name << ") col " << col);
      REQUIRE(m.at(row, col) == Approx(expected).margin(1e-9));
      ++col;
    }
    REQUIRE(col == m.cols);
    ++row;
  }
  REQUIRE(row == m.rows);
}
