"""Command-line interface.

Subcommands mirror the pipeline: ``ingest`` normalises record files,
``query`` materialises family tables, ``rank`` scores hypotheses and
prints one JSON object per ranked entry, ``eval`` computes ranking
metrics over labelled scenario directories, ``synth`` generates them,
and ``serve`` exposes the HTTP API over a workspace.

Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .engine import Engine, load_table, save_table
from .ingest import CSV_WIDE, JSONL, parse_records, records_to_jsonl
from .model import CauseRankError, ScoreMethod, TimeIndex
from .query import build_family_table, evaluate_query, parse_query_file, union_results
from .ranking import DEFAULT_TOP_K, ScenarioOutcome, first_cause_rank, summarize
from .scoring import ScoringConfig
from .synth import GENERATORS, ScenarioSpec, generate, load_scenario_dir, write_scenario

EVAL_METHODS = ("corrmean", "corrmax", "l2", "l2-p50")


def parse_method(text: str, proj_dim) -> tuple[ScoreMethod, int | None]:
    method = ScoreMethod.parse(text)
    if method is ScoreMethod.L2_PROJ and proj_dim is None:
        tail = text.lower().rsplit("p", 1)
        proj_dim = int(tail[1]) if len(tail) == 2 and tail[1].isdigit() else 50
    return method, proj_dim


def parse_range(text: str) -> tuple[int, int]:
    try:
        a, b = text.split("..")
        return int(a), int(b)
    except ValueError:
        raise CauseRankError(f"bad range {text!r}; expected start..end") from None


def _detect_format(path: Path) -> str:
    return CSV_WIDE if path.suffix.lower() == ".csv" else JSONL


def cmd_ingest(args) -> int:
    all_records = []
    rejected = 0
    for name in args.files:
        path = Path(name)
        res = parse_records(path.read_text(), _detect_format(path))
        all_records.extend(res.records)
        rejected += res.rejected
    if rejected:
        print(f"warning: rejected {rejected} non-finite value(s)", file=sys.stderr)
    Path(args.out).write_text(records_to_jsonl(all_records))
    print(f"wrote {len(all_records)} records to {args.out}")
    return 0


def cmd_query(args) -> int:
    records = parse_records(Path(args.dataset).read_text(), JSONL).records
    asts = parse_query_file(Path(args.query_file).read_text())
    if not asts:
        raise CauseRankError(f"no statements in {args.query_file}")
    if args.range:
        a, b = parse_range(args.range)
        index = TimeIndex(a, b, step=args.step)
    else:
        explicit = [ast.range_ for ast in asts if ast.range_ is not None]
        if explicit:
            index = TimeIndex(explicit[0][0], explicit[0][1], step=explicit[0][2])
        else:
            ts = [r.ts for r in records]
            if not ts or min(ts) == max(ts):
                raise CauseRankError("cannot infer a time range; pass --range start..end")
            index = TimeIndex(min(ts), max(ts), step=args.step)
    results = [evaluate_query(ast, records, index) for ast in asts]
    table = build_family_table(union_results(results), index, provenance=args.dataset)
    save_table(args.out, table)
    print(f"wrote {len(table)} families ({table.total_features()} features) to {args.out}")
    return 0


def _rank_index(table_index: TimeIndex, args) -> TimeIndex:
    start, end = table_index.start_ts, table_index.end_ts
    if args.range:
        start, end = parse_range(args.range)
    highlight = parse_range(args.highlight) if args.highlight else None
    return TimeIndex(start, end, step=table_index.step, highlight=highlight)


def cmd_rank(args) -> int:
    table = load_table(args.table)
    method, proj_dim = parse_method(args.method, args.proj_dim)
    config = ScoringConfig(method=method, proj_dim=proj_dim, seed=args.seed)
    engine = Engine(workers=args.workers)
    tid = engine.add_table(table)
    session = engine.create_session(
        tid,
        target=args.target,
        condition=args.condition or [],
        search=args.search or None,
        config=config,
        index=_rank_index(table.index, args),
        k=args.top,
    )
    record = engine.run_search(session)
    for entry in record.ranked.entries:
        print(json.dumps(entry.to_dict(), sort_keys=True))
    for failure in record.failures:
        print(json.dumps(failure.to_dict(), sort_keys=True))
    if args.out:
        Path(args.out).write_text(json.dumps(record.to_dict(with_plots=True), sort_keys=True, indent=2))
        print(f"report written to {args.out}", file=sys.stderr)
    return 0


def _scenario_dirs(root: Path) -> list[Path]:
    if (root / "meta.json").exists():
        return [root]
    subs = sorted(d for d in root.iterdir() if (d / "meta.json").exists())
    if not subs:
        raise CauseRankError(f"{root} holds no scenario (meta.json not found)")
    return subs


def cmd_eval(args) -> int:
    scenario_dirs = []
    for name in args.scenarios:
        scenario_dirs.extend(_scenario_dirs(Path(name)))
    methods = args.methods or list(EVAL_METHODS)
    outcomes: dict[str, list[ScenarioOutcome]] = {}
    labels_of_method: dict[str, str] = {}
    rows = []
    for sdir in scenario_dirs:
        table, labels, meta = load_scenario_dir(sdir)
        row = {"scenario": sdir.name, "families": len(table)}
        for m in methods:
            method, proj_dim = parse_method(m, None)
            config = ScoringConfig(method=method, proj_dim=proj_dim, seed=args.seed)
            label = config.method_label()
            labels_of_method[m] = label
            engine = Engine(workers=args.workers)
            tid = engine.add_table(table)
            session = engine.create_session(
                tid, target=meta["target"], condition=meta.get("condition") or [], config=config
            )
            record = engine.run_search(session)
            r = first_cause_rank(record.ranked, labels)
            outcome = (
                ScenarioOutcome(gain=1.0 / r, rank=r) if r is not None else ScenarioOutcome.failure()
            )
            outcomes.setdefault(label, []).append(outcome)
            row[label] = f"{outcome.gain:.3f}" if not outcome.failed else "-"
        rows.append(row)

    method_labels = [labels_of_method[m] for m in methods]
    header = ["scenario", "families"] + method_labels
    print("\t".join(header))
    for row in rows:
        print("\t".join(str(row.get(col, "-")) for col in header))
    summary = summarize(outcomes)
    print()
    print("\t".join(["summary"] + method_labels))
    fmt = lambda f: "\t".join(f(summary[m]) for m in method_labels)
    print("harmonic-mean\t" + fmt(lambda s: f"{s.harmonic_mean_gain:.3f}"))
    print("average\t" + fmt(lambda s: f"{s.mean_gain:.3f}"))
    print("stdev\t" + fmt(lambda s: f"{s.stdev_gain:.3f}"))
    for k in (1, 5, 10, 20):
        print(f"success@{k}\t" + fmt(lambda s, k=k: f"{100 * s.success_rate[k]:.0f}%"))
    return 0


def cmd_synth(args) -> int:
    spec = ScenarioSpec(
        n_families=args.families,
        features_per_family=args.features,
        T=args.t,
        seed=args.seed,
        joint_m=args.joint_m,
        period=args.period,
    )
    scenario = generate(args.scenario, spec)
    out = write_scenario(scenario, args.out)
    print(f"wrote scenario {args.scenario!r} (seed {args.seed}) to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    workspace = args.workspace or os.environ.get("CAUSERANK_WORKSPACE")
    listen = args.listen or os.environ.get("CAUSERANK_LISTEN", "127.0.0.1:8787")
    host, _, port = listen.rpartition(":")
    engine = Engine(workspace=workspace, workers=args.workers)
    app = create_app(engine)
    if args.table:
        for name in args.table:
            engine.add_table(load_table(name), Path(name).stem)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causerank", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    p_ing = sub.add_parser("ingest", help="normalise record files into one jsonl dataset")
    p_ing.add_argument("files", nargs="+")
    p_ing.add_argument("--out", required=True)
    p_ing.set_defaults(fn=cmd_ingest)

    p_q = sub.add_parser("query", help="evaluate a query file into a family table")
    p_q.add_argument("dataset")
    p_q.add_argument("query_file")
    p_q.add_argument("--out", required=True)
    p_q.add_argument("--range", default=None, help="start..end epoch minutes")
    p_q.add_argument("--step", type=int, default=1)
    p_q.set_defaults(fn=cmd_query)

    p_r = sub.add_parser("rank", help="score and rank hypotheses for a target family")
    p_r.add_argument("table")
    p_r.add_argument("--target", required=True)
    p_r.add_argument("--condition", action="append", default=[])
    p_r.add_argument("--search", action="append", default=[], help="family key or glob (repeatable)")
    p_r.add_argument("--method", default="l2", help="corrmean | corrmax | l2 | l2-p50 | l2-p500")
    p_r.add_argument("--proj-dim", type=int, default=None)
    p_r.add_argument("--seed", type=int, default=0)
    p_r.add_argument("--range", default=None, help="start..end")
    p_r.add_argument("--highlight", default=None, help="start..end event range")
    p_r.add_argument("--top", type=int, default=DEFAULT_TOP_K)
    p_r.add_argument("--workers", type=int, default=1)
    p_r.add_argument("--out", default=None, help="write the full report JSON here")
    p_r.set_defaults(fn=cmd_rank)

    p_e = sub.add_parser("eval", help="ranking metrics over labelled scenario dirs")
    p_e.add_argument("scenarios", nargs="+")
    p_e.add_argument("--methods", action="append", default=None)
    p_e.add_argument("--seed", type=int, default=0)
    p_e.add_argument("--workers", type=int, default=1)
    p_e.set_defaults(fn=cmd_eval)

    p_s = sub.add_parser("synth", help="generate a labelled synthetic scenario")
    p_s.add_argument("scenario", choices=sorted(GENERATORS))
    p_s.add_argument("--seed", type=int, default=0)
    p_s.add_argument("--out", required=True)
    p_s.add_argument("--families", type=int, default=100)
    p_s.add_argument("--features", type=int, default=5)
    p_s.add_argument("--t", type=int, default=1440)
    p_s.add_argument("--joint-m", type=int, default=1)
    p_s.add_argument("--period", type=int, default=144)
    p_s.set_defaults(fn=cmd_synth)

    p_v = sub.add_parser("serve", help="serve the HTTP API over a workspace")
    p_v.add_argument("--workspace", default=None)
    p_v.add_argument("--listen", default=None, help="host:port (default 127.0.0.1:8787)")
    p_v.add_argument("--workers", type=int, default=2)
    p_v.add_argument("--table", action="append", default=[], help="preload a family table .npz")
    p_v.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    from .perf import tune

    tune()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1
    try:
        return args.fn(args)
    except (CauseRankError, FileNotFoundError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # genuine internal failure
        import traceback

        traceback.print_exc()
        print(f"internal error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
