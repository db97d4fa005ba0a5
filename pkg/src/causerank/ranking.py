"""Sorting scored hypotheses and computing ranking-quality metrics.

A ranked report keeps the top-K entries (default 20) sorted by decreasing
score with deterministic key tie-breaks.  Scenario evaluation uses the
discounted gain 1/r of the first true cause (0 when no cause makes the
cutoff, counted as a failure) and success@k indicators; summaries take
arithmetic and harmonic means across scenarios, substituting 0.001 for
failures inside the harmonic mean only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import Hypothesis, ScoreMethod, ScoreReport

DEFAULT_TOP_K = 20
FAILURE_SUBSTITUTE = 0.001


class Label(Enum):
    CAUSE = "cause"
    EFFECT = "effect"
    IRRELEVANT = "irrelevant"


ScenarioLabels = Mapping[str, Label]


def parse_labels(raw: Mapping[str, str]) -> dict[str, Label]:
    return {k: Label(v) for k, v in raw.items()}


@dataclass(frozen=True)
class RankedReport:
    """Top-K score reports, scores non-increasing, key-ascending on ties."""

    entries: tuple[ScoreReport, ...]
    k: int = DEFAULT_TOP_K

    def __post_init__(self):
        if len(self.entries) > self.k:
            raise ValueError(f"{len(self.entries)} entries exceed cutoff {self.k}")

    def family_keys(self) -> list[str]:
        return [e.hypothesis.x for e in self.entries]

    def rank_of(self, family_key: str) -> Optional[int]:
        """1-based rank of a family inside the cutoff, None when absent."""
        for i, e in enumerate(self.entries, start=1):
            if e.hypothesis.x == family_key:
                return i
        return None


def rank(reports: Sequence[ScoreReport], k: int = DEFAULT_TOP_K) -> RankedReport:
    """Stable sort by decreasing score, family key ascending on ties."""
    ordered = sorted(reports, key=lambda r: (-r.score, r.hypothesis.x))
    return RankedReport(entries=tuple(ordered[:k]), k=k)


def first_cause_rank(ranked: RankedReport, labels: ScenarioLabels) -> Optional[int]:
    for i, entry in enumerate(ranked.entries, start=1):
        if labels.get(entry.hypothesis.x) is Label.CAUSE:
            return i
    return None


def discounted_gain(
    ranked: RankedReport, labels: ScenarioLabels, log_discount: bool = False
) -> float:
    """1/r for the first cause within the cutoff, 0 when there is none.

    With log_discount the Zipfian 1/r is replaced by 1/log2(1+r), which
    behaves similarly; the default reproduces the published tables.
    """
    r = first_cause_rank(ranked, labels)
    if r is None:
        return 0.0
    if log_discount:
        return 1.0 / math.log2(1 + r)
    return 1.0 / r


def success_at_k(ranked: RankedReport, labels: ScenarioLabels, k: int) -> int:
    r = first_cause_rank(ranked, labels)
    return int(r is not None and r <= k)


@dataclass(frozen=True)
class ScenarioOutcome:
    """Gain of one scenario under one method; rank None marks a failure."""

    gain: float
    rank: Optional[int]

    @classmethod
    def failure(cls) -> "ScenarioOutcome":
        return cls(gain=0.0, rank=None)

    @classmethod
    def from_gain(cls, gain: Optional[float]) -> "ScenarioOutcome":
        """Encode a published gain value; None or 0 is a failure."""
        if gain is None or gain <= 0.0:
            return cls.failure()
        return cls(gain=float(gain), rank=int(round(1.0 / gain)))

    @property
    def failed(self) -> bool:
        return self.rank is None or self.gain <= 0.0


@dataclass(frozen=True)
class MethodSummary:
    n_scenarios: int
    mean_gain: float
    harmonic_mean_gain: float
    stdev_gain: float
    success_rate: Mapping[int, float] = field(default_factory=dict)


def summarize(
    outcomes_by_method: Mapping[str, Sequence[ScenarioOutcome]],
    ks: Sequence[int] = (1, 5, 10, 20),
) -> dict[str, MethodSummary]:
    """Per-method summary across scenarios.

    Arithmetic mean and sample stdev treat failures as gain 0; the harmonic
    mean substitutes 0.001 for failures; success@k is the fraction of
    scenarios whose first cause ranks <= k.
    """
    out: dict[str, MethodSummary] = {}
    for method, outcomes in outcomes_by_method.items():
        gains = np.array([0.0 if o.failed else o.gain for o in outcomes])
        n = len(gains)
        if n == 0:
            out[method] = MethodSummary(0, 0.0, 0.0, 0.0, {k: 0.0 for k in ks})
            continue
        hm_gains = np.where(gains > 0.0, gains, FAILURE_SUBSTITUTE)
        harmonic = n / float(np.sum(1.0 / hm_gains))
        stdev = float(np.std(gains, ddof=1)) if n > 1 else 0.0
        success = {
            k: float(np.mean([0 if o.failed else int(o.rank <= k) for o in outcomes]))
            for k in ks
        }
        out[method] = MethodSummary(
            n_scenarios=n,
            mean_gain=float(np.mean(gains)),
            harmonic_mean_gain=float(harmonic),
            stdev_gain=stdev,
            success_rate=success,
        )
    return out


def estimate_cost(
    h: Hypothesis,
    dims: Mapping[str, int],
    T: int,
    config,
) -> float:
    """Asymptotic CPU cost units of scoring one hypothesis.

    ``dims`` maps family key -> feature count.  Univariate methods cost
    n_x n_y T; joint regression costs k L (C_xy + C_yz + C_zx) with
    C_ab = n_b min(T n_a², T² n_a); projecting to d dimensions costs
    k L T d (n_x + n_y + n_z + d).
    """
    n_x = dims[h.x]
    n_y = dims[h.y]
    n_z = sum(dims[key] for key in h.z)
    method = config.method
    if method in (ScoreMethod.CORR_MEAN, ScoreMethod.CORR_MAX):
        return float(n_x * n_y * T)
    k = config.k_folds
    L = len(config.lambda_grid)
    if method is ScoreMethod.L2_PROJ:
        d = config.effective_proj_dim()
        return float(k * L * T * d * (n_x + n_y + n_z + d))

    def c(n_a: int, n_b: int) -> float:
        if n_a == 0 or n_b == 0:
            return 0.0
        return float(n_b * min(T * n_a**2, T**2 * n_a))

    return float(k * L * (c(n_x, n_y) + c(n_y, n_z) + c(n_z, n_x)))
