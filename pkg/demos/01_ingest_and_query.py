"""From raw tagged records to dense feature-family matrices.

Walks the first pipeline stage: parse jsonl records, declare families with
the query language, and materialise aligned T x F matrices.
"""

import numpy as np

from causerank import TimeIndex, build_family_table, evaluate_query, parse_query, parse_records

rng = np.random.default_rng(0)

# a day of per-minute observations for a tiny deployment: two input event
# streams, one pipeline runtime, disk latencies on three hosts
lines = []
for ts in range(0, 1440):
    rows = [
        ("input_rate", {"type": "event-1"}, 100 + 10 * np.sin(ts / 60) + rng.normal()),
        ("input_rate", {"type": "event-2"}, 40 + rng.normal()),
        ("runtime", {"component": "pipeline-1"}, 55 + 0.2 * ts / 60 + rng.normal()),
        ("disk", {"host": "datanode-1", "type": "read_latency"}, 3.0 + rng.normal(0, 0.2)),
        ("disk", {"host": "datanode-2", "type": "read_latency"}, 3.1 + rng.normal(0, 0.2)),
        ("disk", {"host": "namenode-1", "type": "read_latency"}, 1.5 + rng.normal(0, 0.1)),
    ]
    for metric, tags, value in rows:
        import json

        lines.append(json.dumps({"ts": ts, "metric": metric, "tags": tags, "value": value}))

parsed = parse_records("\n".join(lines), "jsonl")
print(f"parsed {len(parsed.records)} records ({parsed.rejected} rejected)")

index = TimeIndex(start_ts=0, end_ts=1439, highlight=(600, 700))

# group by metric name: one family per name, one feature per tagged series
by_name = parse_query("FAMILY BY name SELECT avg(value)")
result = evaluate_query(by_name, parsed.records, index)
table = build_family_table(result, index)
for fam in table:
    print(f"  family {fam.family_key!r}: {fam.matrix.shape[0]} x {fam.n_features} "
          f"features={list(fam.feature_names)}")

# group by the host tag instead: hosts become the unit of explanation
by_host = parse_query("FAMILY BY tag('host') SELECT avg(value)")
host_table = build_family_table(evaluate_query(by_host, parsed.records, index), index)
print("\ngrouping by host tag gives:", host_table.keys())
