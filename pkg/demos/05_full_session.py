"""End to end: synthesize an incident, persist a workspace, rank, inspect.

Shows the whole interactive loop the way the CLI and HTTP API drive it:
scenario on disk -> records -> query -> table -> session -> ranked report
with p-values -> fork with a narrowed search.
"""

import json
import tempfile
from pathlib import Path

from causerank import Engine, ScoringConfig, TimeIndex, build_family_table, evaluate_query
from causerank.ingest import parse_records
from causerank.model import ScoreMethod
from causerank.query import parse_query
from causerank.synth import ScenarioSpec, gen_planted_cause, write_scenario

workdir = Path(tempfile.mkdtemp(prefix="causerank-demo-"))

# 1. a labelled incident on disk (records + labels + meta)
spec = ScenarioSpec(n_families=30, features_per_family=4, T=720, seed=9)
scenario_dir = write_scenario(gen_planted_cause(spec), workdir / "incident-0")
print(f"scenario written to {scenario_dir}")

# 2. ingest + query, exactly what `causerank query` does
records = parse_records((scenario_dir / "records.jsonl").read_text(), "jsonl").records
meta = json.loads((scenario_dir / "meta.json").read_text())
index = TimeIndex.from_dict(meta["index"])
table = build_family_table(
    evaluate_query(parse_query("FAMILY BY name SELECT avg(value)"), records, index), index
)
print(f"table: {len(table)} families / {table.total_features()} features")

# 3. a persistent engine workspace: sessions and reports land on disk
engine = Engine(workspace=workdir / "workspace", workers=2)
table_id = engine.add_table(table, "incident-0")
session = engine.create_session(
    table_id,
    target=meta["target"],
    config=ScoringConfig(method=ScoreMethod.L2_PROJ, proj_dim=50, seed=42),
    session_id="demo-session",
)
record = engine.run_search(session)
print("\ntop 5 candidate causes:")
for e in record.ranked.entries[:5]:
    print(f"  {e.score:0.3f}  p<={e.p_value:0.2e}  {e.hypothesis.x}")

# 4. drill down: fork restricted to the suspicious families
child = engine.fork_session(session, {"search": ["cause", "effect-*"]})
drill = engine.run_search(child)
print(f"\nfork {child.id} (search narrowed) ranked {len(drill.ranked.entries)} families:"
      f" {drill.ranked.family_keys()}")

report_path = workdir / "workspace" / "reports" / "demo-session" / "0.json"
print(f"\npersisted report: {report_path.exists()} at {report_path}")
print(f"session log: {(workdir / 'workspace' / 'sessions' / 'demo-session.jsonl').read_text().count(chr(10))} events")
