#!/usr/bin/env python3
"""Generates the synthetic trace fixtures under data/.

Three traces, all deterministic (fixed seed):
  favorable    two long-tail templates where a non-default arm avoids a 10x
               stall; the optimizer estimate is right often enough to seed it
  adversarial  one arm is excellent on the common template but catastrophic on
               a rare one, and the optimizer estimate trusts it everywhere
  unseen_arm   small 3-arm trace whose cold start never tries arm 1

Each trace ships with <name>.arms.json and <name>.catalog.json side-files.
"""

import json
import os
import random

OUT = os.path.join(os.path.dirname(__file__), "..", "data")


def scan(rel, cost, rows):
    return {"node_type": "SeqScan", "cost": cost, "rows": rows, "relation": rel}


def index_scan(rel, cost, rows):
    return {"node_type": "IndexScan", "cost": cost, "rows": rows, "relation": rel}


def node(node_type, cost, rows, columns=None, children=None):
    doc = {"node_type": node_type, "cost": cost, "rows": rows}
    if columns:
        doc["columns"] = columns
    if children:
        doc["children"] = children
    return doc


JOIN_OP_BY_ARM = {0: "HashJoin", 1: "NestLoop", 2: "MergeJoin", 3: "HashJoin", 4: "NestLoop"}


def favorable_templates():
    def short_scan(arm, f):
        return scan("activity", 10.0 * f, 200.0)

    def short_join(arm, f):
        return node(JOIN_OP_BY_ARM[arm], 8.0 * f, 150.0,
                    ["users.id", "badges.user_id"],
                    [scan("users", 12.0 * f, 500.0), index_scan("badges", 6.0 * f, 150.0)])

    def tail_group(arm, f):
        join = node(JOIN_OP_BY_ARM[arm], 40.0 * f, 50000.0,
                    ["posts.id", "votes.post_id"],
                    [scan("posts", 500.0 * f, 80000.0), scan("votes", 300.0 * f, 220000.0)])
        return node("Aggregate", 20.0 * f, 5000.0, ["posts.owner", "posts.id"], [join])

    def tail_exists(arm, f):
        join = node(JOIN_OP_BY_ARM[arm], 30.0 * f, 1200.0,
                    ["comments.post_id", "posts.id"],
                    [scan("comments", 400.0 * f, 90000.0), scan("posts", 200.0 * f, 60000.0)])
        return node("Aggregate", 10.0 * f, 1000.0, ["comments.author"], [join])

    return [
        {
            "template_id": "t_short_scan",
            "count": 20,
            "sql": "SELECT a.id, a.score FROM activity a WHERE a.score > {n} ORDER BY a.score",
            "runtimes": [5.0, 20.0, 30.0, 40.0, 50.0],
            "plan": short_scan,
        },
        {
            "template_id": "t_short_join",
            "count": 20,
            "sql": "SELECT u.name FROM users u JOIN badges b ON u.id = b.user_id "
                   "WHERE b.kind = '{s}'",
            "runtimes": [8.0, 25.0, 35.0, 45.0, 55.0],
            "plan": short_join,
        },
        {
            "template_id": "t_tail_group",
            "count": 10,
            "sql": "SELECT p.owner, COUNT(p.id) FROM posts p JOIN votes v ON p.id = v.post_id "
                   "WHERE p.tag LIKE '{s}%' GROUP BY p.owner",
            "runtimes": [1000.0, 1200.0, 100.0, 900.0, 1100.0],
            "plan": tail_group,
        },
        {
            "template_id": "t_tail_exists",
            "count": 10,
            "sql": "SELECT DISTINCT c.author FROM comments c WHERE EXISTS "
                   "(SELECT 1 FROM posts p WHERE p.id = c.post_id AND p.score > {n})",
            "runtimes": [800.0, 1000.0, 850.0, 90.0, 950.0],
            "plan": tail_exists,
        },
    ]


def adversarial_templates():
    def common(arm, f):
        return scan("sensors", 15.0 * f, 900.0)

    def rare(arm, f):
        return node(JOIN_OP_BY_ARM[arm], 25.0 * f, 3000.0,
                    ["metrics.sensor_id", "sensors.sid"],
                    [scan("metrics", 600.0 * f, 150000.0), scan("sensors", 90.0 * f, 40000.0)])

    return [
        {
            "template_id": "t_common",
            "count": 54,
            "sql": "SELECT s.val FROM sensors s WHERE s.val > {n}",
            "runtimes": [10.0, 12.0, 14.0, 16.0, 8.0],
            "plan": common,
        },
        {
            "template_id": "t_rare",
            "count": 6,
            "sql": "SELECT m.blob FROM metrics m JOIN sensors s ON m.sensor_id = s.sid "
                   "WHERE m.blob LIKE '{s}%'",
            "runtimes": [50.0, 60.0, 70.0, 80.0, 60000.0],
            "plan": rare,
        },
    ]


def unseen_templates():
    def t_a(arm, f):
        return scan("runs", 12.0 * f, 400.0)

    def t_b(arm, f):
        return node("Sort", 5.0 * f, 300.0, ["work.x"], [scan("work", 20.0 * f, 300.0)])

    return [
        {
            "template_id": "t_a",
            "count": 6,
            "sql": "SELECT r.v FROM runs r WHERE r.v > {n}",
            "runtimes": [10.0, 15.0, 12.0],
            "plan": t_a,
        },
        {
            "template_id": "t_b",
            "count": 6,
            "sql": "SELECT w.x FROM work w ORDER BY w.x",
            "runtimes": [20.0, 25.0, 18.0],
            "plan": t_b,
        },
    ]


def pick_est_best(rng, trace_name, template):
    runtimes = template["runtimes"]
    best = runtimes.index(min(runtimes))
    if trace_name == "adversarial":
        return 4  # the optimizer estimate trusts the fast-common arm everywhere
    if trace_name == "unseen_arm":
        return 0 if template["template_id"] == "t_a" else 2
    # favorable: right 60% of the time, default 30%, other non-best 10%;
    # arm 1 is never estimated best, so it stays unseen through cold start
    r = rng.random()
    if r < 0.6:
        return best
    if r < 0.9:
        return 0
    pool = [a for a in range(len(runtimes)) if a not in (best, 1)]
    return rng.choice(pool)


def write_trace(name, templates, arm_count):
    rng = random.Random(42 if name != "adversarial" else 49)
    entries = []
    qnum = 0
    for template in templates:
        for _ in range(template["count"]):
            qnum += 1
            qid = "q%03d" % qnum
            sql = template["sql"].replace("{n}", str(rng.randrange(5, 500)))
            sql = sql.replace("{s}", rng.choice(["gold", "sql", "perf", "disk", "mem"]))
            runtimes = {}
            plans = {}
            for arm in range(arm_count):
                jitter = 0.9 + 0.2 * rng.random()
                runtimes[str(arm)] = round(template["runtimes"][arm] * jitter, 3)
                plans[str(arm)] = template["plan"](arm, round(0.8 + 0.4 * rng.random(), 3))
            entries.append({
                "query_id": qid,
                "template_id": template["template_id"],
                "sql": sql,
                "est_best_arm": pick_est_best(rng, name, template),
                "runtimes_ms": runtimes,
                "plans": plans,
            })
    # interleave templates so every batch sees a mix
    rng.shuffle(entries)
    path = os.path.join(OUT, name + ".ndjson")
    with open(path, "w") as f:
        for e in entries:
            f.write(json.dumps(e, sort_keys=True) + "\n")
    print("wrote %s (%d entries, %d arms)" % (path, len(entries), arm_count))


GUC_BUNDLES = {
    1: {"enable_hashjoin": "off"},
    2: {"enable_nestloop": "off", "enable_hashjoin": "off"},
    3: {"enable_seqscan": "off"},
    4: {"enable_mergejoin": "off", "work_mem": "64MB"},
}


def write_arms(name, arm_count):
    arms = []
    for k in range(arm_count):
        arms.append({
            "arm_id": k,
            "name": "default" if k == 0 else "bundle%d" % k,
            "settings": {} if k == 0 else GUC_BUNDLES[k],
        })
    with open(os.path.join(OUT, name + ".arms.json"), "w") as f:
        json.dump(arms, f, indent=1, sort_keys=True)
        f.write("\n")


CATALOGS = {
    "favorable": [
        ("activity", "id", True, True), ("activity", "score", True, True),
        ("users", "id", True, True), ("users", "name", False, False),
        ("badges", "user_id", True, True), ("badges", "kind", False, False),
        ("posts", "id", True, True), ("posts", "owner", False, True),
        ("posts", "tag", False, False), ("posts", "score", True, False),
        ("votes", "post_id", True, True),
        ("comments", "author", False, True), ("comments", "post_id", True, True),
    ],
    "adversarial": [
        ("sensors", "val", True, False), ("sensors", "sid", True, True),
        ("metrics", "sensor_id", True, True), ("metrics", "blob", False, False),
    ],
    "unseen_arm": [
        ("runs", "v", True, False), ("work", "x", True, True),
    ],
}


def write_catalog(name):
    cols = [{"table": t, "column": c, "numeric": n, "indexed": i}
            for (t, c, n, i) in CATALOGS[name]]
    with open(os.path.join(OUT, name + ".catalog.json"), "w") as f:
        json.dump({"columns": cols}, f, indent=1, sort_keys=True)
        f.write("\n")


def main():
    os.makedirs(OUT, exist_ok=True)
    write_trace("favorable", favorable_templates(), 5)
    write_arms("favorable", 5)
    write_catalog("favorable")
    write_trace("adversarial", adversarial_templates(), 5)
    write_arms("adversarial", 5)
    write_catalog("adversarial")
    write_trace("unseen_arm", unseen_templates(), 3)
    write_arms("unseen_arm", 3)
    write_catalog("unseen_arm")


if __name__ == "__main__":
    main()
