#!/usr/bin/env python3
"""Computes the golden feature matrix for the fixture in test_feature_embed.cpp.

Independent of the C++ library: the fixture query's parsed facts are stated as
literals below, and every channel is computed row by row from its definition.
Output: tests/data/golden_matrix.txt, one row per channel, 9 significant digits.
"""

import json
import os

# Fixture: SELECT DISTINCT p.owner FROM posts p JOIN votes v ON p.id = v.post_id
#          ORDER BY p.owner
FACTS = {
    "columns": [("posts", "id"), ("posts", "owner"), ("votes", "post_id")],  # sorted
    "has_distinct": 1,
    "has_window": 0,
    "has_like": 0,
    "join_count": 1,
    "subquery_count": 0,
    "group_by_count": 0,
    "in_where": set(),
    "in_join": {("posts", "id"), ("votes", "post_id")},
    "in_orderby": {("posts", "owner")},
}

PLAN = json.loads("""{
  "node_type": "MergeJoin", "cost": 20.0, "rows": 2000.0,
  "columns": ["posts.id", "votes.post_id"],
  "children": [
    {"node_type": "SeqScan", "cost": 50.0, "rows": 1500.0, "relation": "posts"},
    {"node_type": "Sort", "cost": 10.0, "rows": 200.0, "columns": ["votes.post_id"],
     "children": [
       {"node_type": "IndexScan", "cost": 20.0, "rows": 200.0, "relation": "votes"}
     ]}
  ]
}""")

CATALOG = {
    ("posts", "id"): {"numeric": True, "indexed": True},
    ("posts", "owner"): {"numeric": False, "indexed": True},
    ("votes", "post_id"): {"numeric": True, "indexed": False},
}

OPERATORS = ["SeqScan", "IndexScan", "HashJoin", "MergeJoin", "NestLoop", "Sort",
             "Aggregate", "Other"]


def flatten(node, out):
    cols = {tuple(c.split(".", 1)) for c in node.get("columns", [])}
    if "relation" in node:
        cols |= {c for c in FACTS["columns"] if c[0] == node["relation"]}
    out.append({"type": node["node_type"], "cost": node["cost"], "rows": node["rows"],
                "cols": cols, "children": node.get("children", [])})
    for child in node.get("children", []):
        flatten(child, out)
    return out


def subtree_has_sort(node):
    if node["node_type"] == "Sort":
        return True
    return any(subtree_has_sort(c) for c in node.get("children", []))


def need_sort_for_merge(node):
    if node["node_type"] == "MergeJoin":
        for child in node.get("children", []):
            if child["node_type"] != "IndexScan" and not subtree_has_sort(child):
                return True
    return any(need_sort_for_merge(c) for c in node.get("children", []))


def one_hot(index, width):
    return [1.0 if i == index else 0.0 for i in range(width)]


def bucket_join(n):
    return one_hot(0 if n == 0 else (1 if n <= 2 else 2), 3)


def bucket_subquery(n):
    return one_hot(0 if n == 0 else 1, 2)


def bucket_group_by(n):
    return one_hot(0 if n == 0 else (1 if n == 1 else (2 if n <= 3 else 3)), 4)


def bucket_rows(rows):
    return one_hot(0 if rows < 1e3 else (1 if rows < 1e6 else 2), 3)


def main():
    cols = FACTS["columns"]
    nodes = flatten(PLAN, [])
    total_cost = sum(n["cost"] for n in nodes)
    total_rows = sum(n["rows"] for n in nodes)

    def share(u, weight, include):
        return sum(n[weight] for n in nodes if include(n) and u in n["cols"]) / (
            total_cost if weight == "cost" else total_rows)

    rows = []

    def broadcast(v):
        rows.append([float(v)] * len(cols))

    broadcast(FACTS["has_distinct"])
    broadcast(1 if need_sort_for_merge(PLAN) else 0)
    for v in bucket_group_by(FACTS["group_by_count"]):
        broadcast(v)
    for v in bucket_rows(PLAN["rows"]):
        broadcast(v)
    broadcast(FACTS["has_window"])
    broadcast(FACTS["has_like"])
    for v in bucket_join(FACTS["join_count"]):
        broadcast(v)
    for v in bucket_subquery(FACTS["subquery_count"]):
        broadcast(v)

    rows.append([share(u, "cost", lambda n: True) for u in cols])
    rows.append([share(u, "rows", lambda n: True) for u in cols])
    rows.append([share(u, "cost", lambda n: n["type"] in ("SeqScan", "IndexScan")) for u in cols])
    rows.append([share(u, "cost", lambda n: n["type"] == "Aggregate") for u in cols])
    for op in OPERATORS:
        broadcast(sum(n["cost"] for n in nodes if n["type"] == op) / total_cost)

    rows.append([1.0 if CATALOG[u]["numeric"] else 0.0 for u in cols])
    rows.append([1.0 if CATALOG[u]["indexed"] else 0.0 for u in cols])
    rows.append([1.0 if u in FACTS["in_where"] else 0.0 for u in cols])
    rows.append([1.0 if u in FACTS["in_join"] else 0.0 for u in cols])
    rows.append([1.0 if u in FACTS["in_orderby"] else 0.0 for u in cols])
    broadcast(1)

    out_path = os.path.join(os.path.dirname(__file__), "..", "data", "golden_matrix.txt")
    os.makedirs(os.path.dirname(out_path), exist_ok=True)
    with open(out_path, "w") as f:
        for row in rows:
            f.write(" ".join("%.9g" % v for v in row) + "\n")
    print("wrote %s (%d rows x %d cols)" % (out_path, len(rows), len(cols)))


if __name__ == "__main__":
    main()
