"""Interactive search sessions: hypothesis generation, parallel scoring,
pseudocauses, forking, plots, and workspace persistence.

A session fixes a target family, a conditioning set, a search filter and a
scoring config over one dataset.  Each run scores every eligible search
family (in parallel when requested), ranks the top K, and appends an
immutable run record to the session history.  Per-hypothesis seeds are
derived by hashing the master seed with the family key, so the schedule
order can never change a score.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (
    CauseRankError,
    FamilyTable,
    FeatureFamily,
    Hypothesis,
    PlotData,
    ScoreReport,
    TimeIndex,
)
from .query import generate_hypotheses
from .ranking import DEFAULT_TOP_K, RankedReport, rank
from .scoring import ScoringConfig, score_hypothesis

log = logging.getLogger(__name__)


class BadPeriod(CauseRankError):
    def __init__(self, period: int, T: int):
        super().__init__(f"period/window {period} outside [2, {T // 2}] for T={T}")


class InvalidOverride(CauseRankError):
    pass


class NotScored(CauseRankError):
    def __init__(self, key: str):
        super().__init__(f"family {key!r} was not scored in the latest run")
        self.key = key


def derive_seed(master_seed: int, family_key: str) -> int:
    """Stable per-hypothesis seed, independent of scheduling order."""
    digest = hashlib.blake2b(f"{master_seed}:{family_key}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


# ---------------------------------------------------------------------------
# Pseudocauses
# ---------------------------------------------------------------------------


class PseudocauseKind(Enum):
    SEASONAL = "seasonal"
    TREND = "trend"
    CUSTOM = "custom-series"


@dataclass(frozen=True)
class Pseudocause:
    source: str
    kind: PseudocauseKind
    series: np.ndarray


def make_pseudocause(family: FeatureFamily, kind: PseudocauseKind, params: dict) -> Pseudocause:
    """Derive a conditioning series from a family's first output.

    seasonal: the mean-per-phase profile for ``period`` grid steps, tiled.
    trend: centered moving average over ``window`` steps (edges shrink).
    custom-series: a caller-supplied length-T series.
    """
    y = family.matrix[:, 0]
    T = len(y)
    if kind is PseudocauseKind.SEASONAL:
        period = int(params["period"])
        if period < 2 or period > T // 2:
            raise BadPeriod(period, T)
        profile = np.array([y[phase::period].mean() for phase in range(period)])
        series = profile[np.arange(T) % period]
    elif kind is PseudocauseKind.TREND:
        window = int(params["window"])
        if window < 2 or window > T // 2:
            raise BadPeriod(window, T)
        series = _centered_moving_average(y, window)
    elif kind is PseudocauseKind.CUSTOM:
        series = np.asarray(params["series"], dtype=np.float64)
        if series.shape != (T,):
            raise ValueError(f"custom series must have length {T}")
    else:
        raise ValueError(f"unknown pseudocause kind {kind!r}")
    return Pseudocause(source=family.family_key, kind=kind, series=series)


def _centered_moving_average(y: np.ndarray, window: int) -> np.ndarray:
    half_lo = (window - 1) // 2
    half_hi = window // 2
    c = np.concatenate([[0.0], np.cumsum(y)])
    T = len(y)
    lo = np.clip(np.arange(T) - half_lo, 0, T)
    hi = np.clip(np.arange(T) + half_hi + 1, 0, T)
    return (c[hi] - c[lo]) / (hi - lo)


# ---------------------------------------------------------------------------
# Sessions and run records
# ---------------------------------------------------------------------------


@dataclass
class Session:
    id: str
    table_id: str
    target: str
    condition: list[str]
    search: Optional[list[str]]
    config: ScoringConfig
    index: TimeIndex
    k: int = DEFAULT_TOP_K
    parent: Optional[str] = None
    runs: list["RunRecord"] = field(default_factory=list)
    derived: dict[str, FeatureFamily] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "table_id": self.table_id,
            "target": self.target,
            "condition": list(self.condition),
            "search": list(self.search) if self.search is not None else None,
            "method": self.config.method_label(),
            "seed": self.config.seed,
            "proj_dim": self.config.proj_dim,
            "k": self.k,
            "index": self.index.to_dict(),
            "parent": self.parent,
            "runs": len(self.runs),
            "derived": sorted(self.derived),
        }


@dataclass(frozen=True)
class RunRecord:
    session_id: str
    run_index: int
    method: str
    seed: int
    ranked: RankedReport
    failures: tuple[ScoreReport, ...]
    exclusions: dict[str, str]
    total_ms: int

    def canonical_dict(self, with_plots: bool = False) -> dict:
        """Deterministic content: identical for identical (data, config, seed)."""
        return {
            "session": self.session_id,
            "run": self.run_index,
            "method": self.method,
            "seed": self.seed,
            "k": self.ranked.k,
            "entries": [e.to_dict(with_plot=with_plots) for e in self.ranked.entries],
            "failures": [f.to_dict() for f in self.failures],
            "exclusions": dict(sorted(self.exclusions.items())),
        }

    def canonical_json(self, with_plots: bool = False) -> str:
        return json.dumps(self.canonical_dict(with_plots), sort_keys=True, indent=None)

    def to_dict(self, with_plots: bool = False) -> dict:
        d = self.canonical_dict(with_plots)
        d["timing"] = {
            "total_ms": self.total_ms,
            "per_family_ms": {
                e.hypothesis.x: e.timing_ms for e in self.ranked.entries + self.failures
            },
        }
        return d


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class Engine:
    """Owns datasets, sessions and the scoring work pool.

    Scoring tasks are pure; session mutation (appending runs) happens on the
    caller's thread, one writer per session.
    """

    def __init__(self, workspace: Optional[str | Path] = None, workers: int = 1):
        self.workers = max(1, workers)
        self.tables: dict[str, FamilyTable] = {}
        self.sessions: dict[str, Session] = {}
        self.workspace = Workspace(workspace) if workspace else None
        self._session_locks: dict[str, threading.Lock] = {}

    # -- datasets -----------------------------------------------------------

    def add_table(self, table: FamilyTable, table_id: Optional[str] = None) -> str:
        table_id = table_id or uuid.uuid4().hex[:12]
        if table_id in self.tables:
            raise ValueError(f"table id {table_id!r} already registered")
        self.tables[table_id] = table
        return table_id

    def _resolved_table(self, session: Session) -> FamilyTable:
        base = self.tables[session.table_id]
        extra = [session.derived[k] for k in sorted(session.derived)]
        return base.merged(extra) if extra else base

    # -- sessions -----------------------------------------------------------

    def create_session(
        self,
        table_id: str,
        target: str,
        condition: Optional[list[str]] = None,
        search: Optional[list[str]] = None,
        config: Optional[ScoringConfig] = None,
        index: Optional[TimeIndex] = None,
        k: int = DEFAULT_TOP_K,
        session_id: Optional[str] = None,
        parent: Optional[str] = None,
    ) -> Session:
        if table_id not in self.tables:
            raise KeyError(f"unknown table {table_id!r}")
        table = self.tables[table_id]
        condition = list(condition or [])
        if target in condition:
            raise InvalidOverride(f"target {target!r} cannot be conditioned on")
        table[target]
        session = Session(
            id=session_id or uuid.uuid4().hex[:12],
            table_id=table_id,
            target=target,
            condition=condition,
            search=list(search) if search is not None else None,
            config=config or ScoringConfig(),
            index=index or table.index,
            k=k,
            parent=parent,
        )
        if session.id in self.sessions:
            raise ValueError(f"session id {session.id!r} already exists")
        self.sessions[session.id] = session
        self._session_locks[session.id] = threading.Lock()
        if self.workspace:
            self.workspace.append_session_event(session.id, {"event": "created", **session.to_dict()})
        return session

    def session_lock(self, session_id: str) -> threading.Lock:
        return self._session_locks[session_id]

    def fork_session(self, session: Session | str, overrides: Optional[dict] = None) -> Session:
        """Child session copying the parent, with overrides applied."""
        parent = self.sessions[session] if isinstance(session, str) else session
        if parent.id not in self.sessions:
            raise KeyError(f"unknown session {parent.id!r}")
        ov = dict(overrides or {})
        target = ov.pop("target", parent.target)
        condition = list(ov.pop("condition", parent.condition))
        search = ov.pop("search", parent.search)
        config = ov.pop("config", parent.config)
        index = ov.pop("index", parent.index)
        k = ov.pop("k", parent.k)
        session_id = ov.pop("session_id", None)
        if ov:
            raise InvalidOverride(f"unknown override keys: {sorted(ov)}")
        if target in condition:
            raise InvalidOverride(f"target {target!r} cannot be conditioned on")
        child = self.create_session(
            table_id=parent.table_id,
            target=target,
            condition=condition,
            search=search,
            config=config,
            index=index,
            k=k,
            session_id=session_id,
            parent=parent.id,
        )
        child.derived.update(parent.derived)
        return child

    def add_pseudocause(
        self,
        session: Session | str,
        source: str,
        kind: PseudocauseKind | str,
        params: Optional[dict] = None,
        key: Optional[str] = None,
    ) -> str:
        """Materialise a pseudocause family and add it to the conditioning set."""
        s = self.sessions[session] if isinstance(session, str) else session
        kind = PseudocauseKind(kind) if isinstance(kind, str) else kind
        table = self._resolved_table(s)
        pc = make_pseudocause(table[source], kind, params or {})
        key = key or f"pseudo:{source}:{kind.value}"
        if key == s.target:
            raise InvalidOverride("pseudocause key collides with the target")
        family = FeatureFamily(
            family_key=key,
            feature_names=(key,),
            matrix=pc.series[:, None],
            provenance=f"pseudocause({source}, {kind.value})",
        )
        s.derived[key] = family
        if key not in s.condition:
            s.condition.append(key)
        if self.workspace:
            self.workspace.append_session_event(
                s.id, {"event": "pseudocause", "key": key, "source": source, "kind": kind.value}
            )
        return key

    # -- running ------------------------------------------------------------

    def run_search(self, session: Session | str, workers: Optional[int] = None) -> RunRecord:
        """Score all eligible search families and append the ranked report."""
        s = self.sessions[session] if isinstance(session, str) else session
        table = self._resolved_table(s)
        if s.index is not table.index and s.index != table.index:
            table = slice_table(table, s.index)
        t0 = time.perf_counter()
        hypotheses, exclusions = generate_hypotheses(table, s.target, s.condition, s.search)

        def score_one(h: Hypothesis) -> ScoreReport:
            cfg = s.config.with_seed(derive_seed(s.config.seed, h.x))
            return score_hypothesis(h, table, cfg)

        results: list[ScoreReport] = []
        failures: list[ScoreReport] = []
        n_workers = self.workers if workers is None else max(1, workers)
        if n_workers > 1 and len(hypotheses) > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                outcomes = list(pool.map(_guarded(score_one), hypotheses))
        else:
            outcomes = [_guarded(score_one)(h) for h in hypotheses]
        for h, (report, err) in zip(hypotheses, outcomes):
            if err is None:
                results.append(report)
            else:
                log.warning("family %s failed to score: %s", h.x, err)
                failures.append(
                    ScoreReport(
                        hypothesis=h,
                        score=0.0,
                        method=s.config.method_label(),
                        p_value=1.0,
                        note=f"failed: {err}",
                    )
                )
        failures.sort(key=lambda r: r.hypothesis.x)
        record = RunRecord(
            session_id=s.id,
            run_index=len(s.runs),
            method=s.config.method_label(),
            seed=s.config.seed,
            ranked=rank(results, k=s.k),
            failures=tuple(failures),
            exclusions=exclusions,
            total_ms=int(round((time.perf_counter() - t0) * 1000)),
        )
        s.runs.append(record)
        if self.workspace:
            self.workspace.write_report(record)
            self.workspace.append_session_event(
                s.id, {"event": "run", "run": record.run_index, "families": len(results)}
            )
        return record

    def plot_series(self, session: Session | str, family_key: str) -> PlotData:
        """Observed target-given-Z and its prediction for a scored family."""
        s = self.sessions[session] if isinstance(session, str) else session
        if not s.runs:
            raise NotScored(family_key)
        latest = s.runs[-1]
        for entry in latest.ranked.entries + latest.failures:
            if entry.hypothesis.x == family_key and entry.plot is not None:
                return entry.plot
        raise NotScored(family_key)


def _guarded(fn):
    def wrapper(h):
        try:
            return fn(h), None
        except Exception as e:  # scoring failures degrade, never crash the run
            return None, str(e)

    return wrapper


def slice_table(table: FamilyTable, index: TimeIndex) -> FamilyTable:
    """Restrict a table to a sub-range of its grid (same step)."""
    base = table.index
    if index.step != base.step:
        raise ValueError("cannot change the grid step of an existing table")
    lo = base.slot_of(index.start_ts)
    hi = base.slot_of(index.end_ts)
    families = [
        replace(f, matrix=f.matrix[lo : hi + 1].copy())
        for f in table
    ]
    return FamilyTable(index, families)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


class Workspace:
    """Directory layout: datasets/, sessions/<id>.jsonl, reports/<session>/<run>.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("datasets", "sessions", "reports"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    def dataset_path(self, dataset_id: str) -> Path:
        return self.root / "datasets" / f"{dataset_id}.npz"

    def save_dataset(self, dataset_id: str, table: FamilyTable) -> Path:
        path = self.dataset_path(dataset_id)
        save_table(path, table)
        return path

    def load_dataset(self, dataset_id: str) -> FamilyTable:
        return load_table(self.dataset_path(dataset_id))

    def append_session_event(self, session_id: str, event: dict) -> None:
        path = self.root / "sessions" / f"{session_id}.jsonl"
        with path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(event, sort_keys=True) + "\n")

    def write_report(self, record: RunRecord) -> Path:
        d = self.root / "reports" / record.session_id
        d.mkdir(parents=True, exist_ok=True)
        path = d / f"{record.run_index}.json"
        path.write_text(json.dumps(record.to_dict(with_plots=True), sort_keys=True, indent=2))
        return path


def save_table(path: str | Path, table: FamilyTable) -> None:
    """Persist a family table as .npz: per-family matrices plus a JSON header."""
    meta = {
        "index": table.index.to_dict(),
        "families": [
            {
                "key": f.family_key,
                "features": list(f.feature_names),
                "metrics": list(f.metrics),
                "provenance": f.provenance,
                "array": f"m{i}",
            }
            for i, f in enumerate(table)
        ],
    }
    arrays = {f"m{i}": f.matrix for i, f in enumerate(table)}
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_table(path: str | Path) -> FamilyTable:
    with np.load(path) as z:
        meta = json.loads(bytes(z["meta"].tobytes()).decode())
        index = TimeIndex.from_dict(meta["index"])
        families = [
            FeatureFamily(
                family_key=fm["key"],
                feature_names=tuple(fm["features"]),
                matrix=z[fm["array"]],
                provenance=fm.get("provenance", ""),
                metrics=tuple(fm.get("metrics", fm["features"])),
            )
            for fm in meta["families"]
        ]
    return FamilyTable(index, families)
