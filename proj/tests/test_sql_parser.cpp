#include <catch2/catch_amalgamated.hpp>

#include "ontotune/sql_features.hpp"
#include "ontotune/sql_parser.hpp"

using namespace ontotune;

TEST_CASE("distinct single-table query", "[parser]") {
  auto pq = parse_sql_subset("SELECT DISTINCT a.x FROM t a");
  CHECK(pq.has_distinct);
  CHECK(pq.join_count == 0);
  CHECK(pq.subquery_count == 0);
  CHECK(pq.tables == std::set<std::string>{"t"});
  CHECK(pq.columns == std::set<ColumnRef>{{"t", "x"}});
}

TEST_CASE("minimal statement has no tables or columns", "[parser]") {
  auto pq = parse_sql_subset("SELECT 1");
  CHECK(pq.tables.empty());
  CHECK(pq.columns.empty());
  CHECK_FALSE(pq.has_distinct);
  CHECK_FALSE(pq.has_like);
  CHECK_FALSE(pq.has_window);
  CHECK(pq.join_count == 0);
  CHECK(pq.group_by_count == 0);
}

TEST_CASE("like and order by set usage flags", "[parser]") {
  auto pq = parse_sql_subset("SELECT x FROM t WHERE y LIKE 'a%' ORDER BY x");
  CHECK(pq.has_like);
  CHECK(pq.has_order_by);
  CHECK(pq.in_where == std::set<ColumnRef>{{"t", "y"}});
  CHECK(pq.in_orderby == std::set<ColumnRef>{{"t", "x"}});
  CHECK(pq.columns == std::set<ColumnRef>{{"t", "x"}, {"t", "y"}});
}

TEST_CASE("joins explicit and implicit", "[parser]") {
  auto pq = parse_sql_subset(
      "SELECT u.name FROM users u JOIN badges b ON u.id = b.user_id WHERE b.kind = 'gold'");
  CHECK(pq.join_count == 1);
  CHECK(pq.in_join == std::set<ColumnRef>{{"users", "id"}, {"badges", "user_id"}});
  CHECK(pq.tables == std::set<std::string>{"users", "badges"});

  auto implicit = parse_sql_subset("SELECT a.x FROM t a, s b WHERE a.x = b.y");
  CHECK(implicit.join_count == 1);

  auto multi = parse_sql_subset(
      "SELECT a.x FROM t a, s b, r c LEFT OUTER JOIN q d ON c.k = d.k WHERE a.x = b.y");
  CHECK(multi.join_count == 3);
}

TEST_CASE("subqueries are counted and scoped", "[parser]") {
  auto pq = parse_sql_subset(
      "SELECT DISTINCT c.author FROM comments c "
      "WHERE EXISTS (SELECT 1 FROM posts p WHERE p.id = c.post_id AND p.score > 100)");
  CHECK(pq.subquery_count == 1);
  CHECK(pq.tables == std::set<std::string>{"comments", "posts"});
  // the correlated reference resolves against the outer scope
  CHECK(pq.columns.count({"comments", "post_id"}) == 1);
  CHECK(pq.in_where.count({"posts", "score"}) == 1);

  auto in_sub = parse_sql_subset("SELECT x FROM t WHERE x IN (SELECT y FROM s)");
  CHECK(in_sub.subquery_count == 1);
  CHECK(in_sub.columns.count({"s", "y"}) == 1);
}

TEST_CASE("window functions and group by", "[parser]") {
  auto pq = parse_sql_subset(
      "SELECT p.owner, COUNT(p.id), SUM(p.score) OVER (PARTITION BY p.owner) "
      "FROM posts p GROUP BY p.owner, p.site");
  CHECK(pq.has_window);
  CHECK(pq.group_by_count == 2);
  CHECK(pq.columns.count({"posts", "site"}) == 1);
}

TEST_CASE("alias invariance", "[parser][property]") {
  auto a = parse_sql_subset(
      "SELECT u.name FROM users u JOIN badges b ON u.id = b.user_id ORDER BY u.name");
  auto b = parse_sql_subset(
      "SELECT zz.name FROM users zz JOIN badges qq ON zz.id = qq.user_id ORDER BY zz.name");
  CHECK(a.columns == b.columns);
  CHECK(a.in_join == b.in_join);
  CHECK(a.in_orderby == b.in_orderby);
  CHECK(extract_template_features(a).num_join_bucket == extract_template_features(b).num_join_bucket);
}

TEST_CASE("identifiers are lower-cased", "[parser]") {
  auto pq = parse_sql_subset("SELECT T.X FROM Tab T WHERE T.X > 5");
  CHECK(pq.columns == std::set<ColumnRef>{{"tab", "x"}});
}

TEST_CASE("parse errors carry position and token", "[parser]") {
  try {
    parse_sql_subset("SELECT x FROM t WHERE\n  y &&& 3");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("&") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_sql_subset("DELETE FROM t"), UnsupportedStatementError);
  CHECK_THROWS_AS(parse_sql_subset("INSERT INTO t (x) SELECT 1"), UnsupportedStatementError);
  CHECK_THROWS_AS(parse_sql_subset(""), ParseError);
  CHECK_THROWS_AS(parse_sql_subset("SELECT x FROM t t2, s t2"), ParseError);
  CHECK_THROWS_AS(parse_sql_subset("SELECT x FROM t a, s b"), ParseError);  // ambiguous x
  CHECK_THROWS_AS(parse_sql_subset("SELECT q.x FROM t"), ParseError);       // unknown alias
}

TEST_CASE("bucketize picks exactly one bucket", "[parser][features]") {
  CHECK(bucketize(2, join_buckets()) == std::vector<double>{0.0, 1.0, 0.0});
  CHECK(bucketize(0, join_buckets()) == std::vector<double>{1.0, 0.0, 0.0});
  CHECK(bucketize(1000000, join_buckets()) == std::vector<double>{0.0, 0.0, 1.0});
  CHECK(bucketize(7, group_by_buckets()) == std::vector<double>{0.0, 0.0, 0.0, 1.0});

  BucketSpec gap{{{0, 1}, {3, kOpenEnd}}};
  CHECK_THROWS_AS(bucketize(2, gap), ConfigError);
  BucketSpec overlap{{{0, 2}, {2, kOpenEnd}}};
  CHECK_THROWS_AS(bucketize(2, overlap), ConfigError);
  BucketSpec closed{{{0, 5}}};
  CHECK_THROWS_AS(bucketize(2, closed), ConfigError);
}

TEST_CASE("template features buckets", "[parser][features]") {
  auto pq = parse_sql_subset("SELECT x FROM t");
  auto tf = extract_template_features(pq);
  CHECK(tf.num_join_bucket == std::array<double, 3>{1.0, 0.0, 0.0});
  CHECK(tf.num_subquery_bucket == std::array<double, 2>{1.0, 0.0});
  CHECK(tf.group_by_bucket == std::array<double, 4>{1.0, 0.0, 0.0, 0.0});
  CHECK(tf.rows_bucket == std::array<double, 3>{1.0, 0.0, 0.0});  // no plan: lowest bucket

  // every bucket vector is one-hot for arbitrary queries
  for (const char* sql : {"SELECT 1", "SELECT a.x FROM t a, s b, r c WHERE a.x = 1",
                          "SELECT x FROM t GROUP BY x ORDER BY x"}) {
    auto f = extract_template_features(parse_sql_subset(sql));
    auto one_hot = [](auto arr) {
      int ones = 0;
      for (double v : arr) {
        if (v == 1.0) ++ones;
        else if (v != 0.0) return false;
      }
      return ones == 1;
    };
    CHECK(one_hot(f.group_by_bucket));
    CHECK(one_hot(f.rows_bucket));
    CHECK(one_hot(f.num_join_bucket));
    CHECK(one_hot(f.num_subquery_bucket));
  }
}

TEST_CASE("merge join sort heuristic", "[parser][features]") {
  auto pq = parse_sql_subset("SELECT a.x FROM t a JOIN s b ON a.x = b.y");

  auto mk = [](const std::string& left_type, bool left_sorted_child) {
    PlanTree plan;
    PlanNode root{0, OperatorType::MergeJoin, "MergeJoin", 10.0, 5.0, {1, 2}, {}, ""};
    PlanNode left{1, operator_from_name(left_type), left_type, 5.0, 5.0, {}, {}, ""};
    PlanNode right{2, OperatorType::IndexScan, "IndexScan", 5.0, 5.0, {}, {}, ""};
    if (left_sorted_child) {
      left.children.push_back(3);
      plan.nodes = {root, left, right,
                    PlanNode{3, OperatorType::Sort, "Sort", 1.0, 5.0, {}, {}, ""}};
    } else {
      plan.nodes = {root, left, right};
    }
    plan.root = 0;
    plan.fingerprint = plan_fingerprint(plan);
    return plan;
  };

  PlanTree unsorted = mk("SeqScan", false);
  CHECK(extract_template_features(pq, &unsorted).need_sort_for_merge == 1.0);

  PlanTree sorted_child = mk("SeqScan", true);
  CHECK(extract_template_features(pq, &sorted_child).need_sort_for_merge == 0.0);

  PlanTree index_inputs = mk("IndexScan", false);
  CHECK(extract_template_features(pq, &index_inputs).need_sort_for_merge == 0.0);

  CHECK(extract_template_features(pq, nullptr).need_sort_for_merge == 0.0);
}
