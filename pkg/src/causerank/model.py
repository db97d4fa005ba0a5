"""Core domain types shared by every stage of the pipeline.

Records come in as (timestamp, metric, tags, value) observations, get grouped
into feature families (dense T x F matrices over a shared minute grid), and
hypotheses over those families are scored and ranked.  Everything here is
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np


class CauseRankError(Exception):
    """Base class for all engine errors."""


class UnknownFamily(CauseRankError):
    def __init__(self, key: str):
        super().__init__(f"unknown family: {key!r}")
        self.key = key


class OverlappingMetrics(CauseRankError):
    def __init__(self, metric: str, roles: str):
        super().__init__(f"metric {metric!r} appears in both {roles}")
        self.metric = metric


class EmptyFamily(CauseRankError):
    def __init__(self, key: str):
        super().__init__(f"family {key!r} has no metrics")
        self.key = key


def canonical_series_key(metric: str, tags: Mapping[str, str]) -> str:
    """Canonical identity of one univariate series, e.g. ``disk{host=a,type=r}``.

    Tags are sorted by key so the same series always renders the same string.
    """
    inner = ",".join(f"{k}={v}" for k, v in sorted(tags.items()))
    return f"{metric}{{{inner}}}"


@dataclass(frozen=True)
class MetricRecord:
    """One observation: minute timestamp, metric name, tag map, finite value."""

    ts: int
    metric: str
    tags: Mapping[str, str]
    value: float

    def __post_init__(self):
        if not self.metric:
            raise ValueError("metric name must be non-empty")
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite value for {self.metric!r} at ts={self.ts}")

    @property
    def series_key(self) -> str:
        return canonical_series_key(self.metric, self.tags)


@dataclass(frozen=True)
class TimeIndex:
    """A regular minute grid plus an optional highlighted event sub-range.

    The grid is ``start_ts, start_ts + step, ...`` up to and including
    ``end_ts`` when it lands on the grid.
    """

    start_ts: int
    end_ts: int
    step: int = 1
    highlight: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.start_ts >= self.end_ts:
            raise ValueError(f"start_ts {self.start_ts} must precede end_ts {self.end_ts}")
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")
        if self.highlight is not None:
            h0, h1 = self.highlight
            if not (self.start_ts <= h0 <= h1 <= self.end_ts):
                raise ValueError(
                    f"highlight [{h0}, {h1}] not contained in [{self.start_ts}, {self.end_ts}]"
                )

    def __len__(self) -> int:
        return (self.end_ts - self.start_ts) // self.step + 1

    def timestamps(self) -> np.ndarray:
        return np.arange(self.start_ts, self.end_ts + 1, self.step, dtype=np.int64)

    def slot_of(self, ts: int) -> int:
        """Grid slot for an exact grid timestamp."""
        off = ts - self.start_ts
        if off % self.step != 0 or not (0 <= off // self.step < len(self)):
            raise ValueError(f"ts {ts} is not on the grid")
        return off // self.step

    def to_dict(self) -> dict:
        d = {"start_ts": self.start_ts, "end_ts": self.end_ts, "step": self.step}
        if self.highlight is not None:
            d["highlight"] = list(self.highlight)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TimeIndex":
        h = d.get("highlight")
        return cls(
            start_ts=int(d["start_ts"]),
            end_ts=int(d["end_ts"]),
            step=int(d.get("step", 1)),
            highlight=tuple(h) if h else None,
        )


@dataclass(frozen=True)
class FeatureFamily:
    """A named group of univariate metrics treated as one multivariate variable.

    ``matrix`` is T x F, row-major, aligned to a TimeIndex, with no missing
    cells (interpolation happens at assembly).  ``metrics`` carries the
    underlying series identity of each column; it equals ``feature_names``
    unless a query derived several features from the same series.
    """

    family_key: str
    feature_names: tuple[str, ...]
    matrix: np.ndarray
    provenance: str = ""
    metrics: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.feature_names:
            raise EmptyFamily(self.family_key)
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError(f"duplicate feature names in family {self.family_key!r}")
        m = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
        if m.ndim != 2 or m.shape[1] != len(self.feature_names):
            raise ValueError(
                f"family {self.family_key!r}: matrix shape {m.shape} does not match "
                f"{len(self.feature_names)} feature names"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError(f"family {self.family_key!r}: matrix has non-finite cells")
        object.__setattr__(self, "matrix", m)
        if not self.metrics:
            object.__setattr__(self, "metrics", self.feature_names)
        elif len(self.metrics) != len(self.feature_names):
            raise ValueError(f"family {self.family_key!r}: metrics do not match features")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def metric_set(self) -> frozenset[str]:
        return frozenset(self.metrics)


class FamilyTable:
    """Collection of feature families sharing one TimeIndex."""

    def __init__(self, index: TimeIndex, families: Sequence[FeatureFamily] = ()):
        self.index = index
        self._families: dict[str, FeatureFamily] = {}
        for fam in families:
            self.add(fam)

    def add(self, family: FeatureFamily) -> None:
        if family.family_key in self._families:
            raise ValueError(f"family key {family.family_key!r} already in table")
        if family.matrix.shape[0] != len(self.index):
            raise ValueError(
                f"family {family.family_key!r}: {family.matrix.shape[0]} rows, "
                f"index has {len(self.index)}"
            )
        self._families[family.family_key] = family

    def __contains__(self, key: str) -> bool:
        return key in self._families

    def __getitem__(self, key: str) -> FeatureFamily:
        try:
            return self._families[key]
        except KeyError:
            raise UnknownFamily(key) from None

    def __iter__(self) -> Iterator[FeatureFamily]:
        return iter(self._families.values())

    def __len__(self) -> int:
        return len(self._families)

    def keys(self) -> list[str]:
        return list(self._families)

    def total_features(self) -> int:
        return sum(f.n_features for f in self)

    def merged(self, extra: Sequence[FeatureFamily]) -> "FamilyTable":
        """New table with extra (e.g. session-derived) families appended."""
        return FamilyTable(self.index, list(self._families.values()) + list(extra))


@dataclass(frozen=True)
class Hypothesis:
    """Candidate-cause family x, target family y, conditioning families z."""

    x: str
    y: str
    z: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(self.z))


def validate_hypothesis(h: Hypothesis, table: FamilyTable) -> None:
    """Check that x, y, z resolve, are non-empty, and share no metric.

    Raises UnknownFamily, EmptyFamily, or OverlappingMetrics (naming the
    offending metric); returns None when the hypothesis is well formed.
    """
    roles: list[tuple[str, str]] = [("x", h.x), ("y", h.y)]
    roles += [("z", key) for key in h.z]
    seen: dict[str, str] = {}
    for role, key in roles:
        fam = table[key]
        if fam.n_features < 1:
            raise EmptyFamily(key)
        for metric in fam.metric_set():
            if metric in seen and seen[metric] != role + key:
                raise OverlappingMetrics(metric, f"{seen[metric]} and {role}={key}")
            seen[metric] = role + key


class ScoreMethod(Enum):
    CORR_MEAN = "corrmean"
    CORR_MAX = "corrmax"
    L2 = "l2"
    L2_PROJ = "l2-proj"

    @classmethod
    def parse(cls, text: str) -> "ScoreMethod":
        t = text.strip().lower().replace("_", "-")
        for m in cls:
            if m.value == t:
                return m
        # accept l2-p50 style spellings
        if t.startswith("l2-p") and t[4:].isdigit():
            return cls.L2_PROJ
        raise ValueError(
            f"unknown method {text!r}; valid methods: corrmean, corrmax, l2, l2-proj"
        )


@dataclass(frozen=True)
class PlotData:
    """Diagnostic series pair: observed target (given Z) and its prediction.

    For a multivariate target only the first output series is plotted.
    """

    observed: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observed, dtype=np.float64).ravel()
        pred = np.asarray(self.predicted, dtype=np.float64).ravel()
        if obs.shape != pred.shape:
            raise ValueError("observed and predicted series must have equal length")
        object.__setattr__(self, "observed", obs)
        object.__setattr__(self, "predicted", pred)

    def to_dict(self) -> dict:
        return {"observed": self.observed.tolist(), "predicted": self.predicted.tolist()}


@dataclass(frozen=True)
class ScoreReport:
    """Score of one hypothesis, in [0, 1], with its null p-value and plot."""

    hypothesis: Hypothesis
    score: float
    method: str
    p_value: float
    plot: Optional[PlotData] = None
    timing_ms: int = 0
    note: str = ""
    diagnostics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")
        if not (0.0 <= self.p_value <= 1.0):
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")

    def to_dict(self, with_plot: bool = False, with_timing: bool = False) -> dict:
        """Canonical dict: a pure function of (data, config, seed).

        Timing is volatile measurement, not analysis output, so it is only
        included on request and never takes part in report equality.
        """
        d = {
            "family": self.hypothesis.x,
            "target": self.hypothesis.y,
            "condition": list(self.hypothesis.z),
            "score": round(float(self.score), 12),
            "method": self.method,
            "p_value": round(float(self.p_value), 12),
        }
        if with_timing:
            d["timing_ms"] = int(self.timing_ms)
        if self.note:
            d["note"] = self.note
        if self.diagnostics:
            d["diagnostics"] = {k: float(v) for k, v in sorted(self.diagnostics.items())}
        if with_plot and self.plot is not None:
            d["plot"] = self.plot.to_dict()
        return d
