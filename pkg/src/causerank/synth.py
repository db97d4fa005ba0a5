"""Seeded synthetic scenarios with known ground truth, at desk scale.

Each generator is a pure function of its spec (seed included) and returns a
family table plus cause/effect/irrelevant labels.  The planted structures
are built from explicit covariances, so the population quantities the tests
assert against (correlations, joint and partial r²) are available in closed
form in ``Scenario.population`` before any sampling happens.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import FamilyTable, FeatureFamily, MetricRecord, TimeIndex
from .ranking import Label

TARGET_KEY = "target"


@dataclass(frozen=True)
class ScenarioSpec:
    """Size and structure of one synthetic scenario."""

    n_families: int = 100
    features_per_family: int = 5
    T: int = 1440
    noise: float = 1.0
    seed: int = 0
    # planted-cause structure
    joint_m: int = 1  # 1 = univariate plant; >1 = joint-of-m
    signal_r2: float = 0.8  # population r² of the target on the planted family
    per_feature_corr: float = 0.15  # per-feature |rho| in the joint variant
    n_effects: int = 2
    effect_corr: float = 0.4
    # seasonal + spike structure
    period: int = 144
    seasonal_amp: float = 3.0
    spike_rate: float = 0.05
    spike_amp: float = 1.0  # std of the spike component (0 disables spikes)
    n_confounders: int = 4

    def __post_init__(self):
        if self.T < 100:
            raise ValueError("T must be >= 100")
        if not (0 < self.signal_r2 < 1):
            raise ValueError("signal_r2 must be in (0, 1)")


@dataclass
class Scenario:
    kind: str
    spec: ScenarioSpec
    table: FamilyTable
    labels: dict[str, Label]
    target: str
    condition: list[str] = field(default_factory=list)
    population: dict[str, float] = field(default_factory=dict)


def _index(spec: ScenarioSpec) -> TimeIndex:
    return TimeIndex(start_ts=0, end_ts=spec.T - 1, step=1)


def _family(key: str, matrix: np.ndarray, provenance: str) -> FeatureFamily:
    width = max(2, len(str(matrix.shape[1] - 1)))
    names = tuple(f"{key}{{f={i:0{width}d}}}" for i in range(matrix.shape[1]))
    return FeatureFamily(key, names, matrix, provenance=provenance)


def _noise_families(rng: np.random.Generator, spec: ScenarioSpec, count: int) -> list[FeatureFamily]:
    out = []
    width = max(3, len(str(max(count - 1, 0))))
    for i in range(count):
        m = rng.standard_normal((spec.T, spec.features_per_family))
        out.append(_family(f"noise-{i:0{width}d}", m, "synth:noise"))
    return out


def gen_null(spec: ScenarioSpec) -> Scenario:
    """Everything independent: no family is a cause of the target."""
    rng = np.random.default_rng(spec.seed)
    index = _index(spec)
    target = _family(TARGET_KEY, rng.standard_normal((spec.T, 1)), "synth:null")
    families = [target] + _noise_families(rng, spec, spec.n_families)
    labels = {f.family_key: Label.IRRELEVANT for f in families}
    return Scenario(
        kind="null",
        spec=spec,
        table=FamilyTable(index, families),
        labels=labels,
        target=TARGET_KEY,
        population={"joint_r2": 0.0},
    )


def gen_planted_cause(spec: ScenarioSpec) -> Scenario:
    """Target driven by one planted family; optional effect families.

    Univariate plant (joint_m == 1): column 0 of the cause family explains
    ``signal_r2`` of the target's variance.

    Joint-of-m plant: m features share a confound ``c`` and the target is a
    signed sum of their idiosyncratic parts, so each single feature has a
    small correlation with the target while the joint r² stays high:

        f_i = gamma * c + d_i,   y = sum_i s_i d_i + eps,  s_i = +1/-1

    With even m the signs cancel the confound exactly and y is a linear
    function of the features; gamma sets the per-feature correlation.
    """
    rng = np.random.default_rng(spec.seed)
    index = _index(spec)
    m = spec.joint_m
    population: dict[str, float] = {"joint_r2": spec.signal_r2}

    if m <= 1:
        cause = rng.standard_normal((spec.T, spec.features_per_family))
        signal = cause[:, 0]
        # var(w*signal) / (var(w*signal) + noise²) = signal_r2
        w = math.sqrt(spec.signal_r2 / (1 - spec.signal_r2)) * spec.noise
        y = w * signal + spec.noise * rng.standard_normal(spec.T)
        population["cause_corr"] = math.sqrt(spec.signal_r2)
    else:
        if m % 2 != 0:
            raise ValueError("joint_m must be even so the shared confound cancels")
        r2 = spec.signal_r2
        rho = spec.per_feature_corr
        # beta=1: var(signal) = m, noise so that m/(m+s2) = r2
        s2 = m * (1 - r2) / r2
        # rho = 1/sqrt((gamma²+1)(m+s2))  =>  gamma² = 1/(rho² (m+s2)) - 1
        g2 = 1.0 / (rho * rho * (m + s2)) - 1.0
        if g2 <= 0:
            raise ValueError("per_feature_corr too large for the requested joint r²")
        gamma = math.sqrt(g2)
        c = rng.standard_normal(spec.T)
        d = rng.standard_normal((spec.T, m))
        signs = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
        features = gamma * c[:, None] + d
        y = d @ signs + math.sqrt(s2) * rng.standard_normal(spec.T)
        extra = spec.features_per_family - m
        if extra > 0:
            features = np.hstack([features, rng.standard_normal((spec.T, extra))])
        cause = features
        population["cause_corr"] = rho

    families = [_family(TARGET_KEY, y[:, None], "synth:planted"), _family("cause", cause, "synth:planted")]
    labels = {TARGET_KEY: Label.IRRELEVANT, "cause": Label.CAUSE}

    var_y = float(np.var(y))
    for j in range(spec.n_effects):
        # g = a*y + e with corr(g, y) = effect_corr
        rho_e = spec.effect_corr
        a = rho_e / math.sqrt(var_y * (1 - rho_e**2))
        g = a * y + rng.standard_normal(spec.T)
        fam = _family(f"effect-{j}", g[:, None], "synth:planted")
        families.append(fam)
        labels[fam.family_key] = Label.EFFECT
    population["effect_corr"] = spec.effect_corr if spec.n_effects else 0.0

    n_noise = max(0, spec.n_families - len(families))
    noise = _noise_families(rng, spec, n_noise)
    families.extend(noise)
    labels.update({f.family_key: Label.IRRELEVANT for f in noise})
    return Scenario(
        kind="joint" if m > 1 else "planted",
        spec=spec,
        table=FamilyTable(index, families),
        labels=labels,
        target=TARGET_KEY,
        population=population,
    )


def gen_seasonal_spike(spec: ScenarioSpec) -> Scenario:
    """Target = seasonal component + spike train; the spike driver is the cause.

    Confounder families track the seasonal component only, so without
    conditioning they outrank the true spike driver; conditioning on the
    target's seasonal pseudocause reverses that.
    """
    rng = np.random.default_rng(spec.seed)
    index = _index(spec)
    t = np.arange(spec.T)
    seasonal = np.sin(2 * np.pi * t / spec.period)
    mask = rng.random(spec.T) < spec.spike_rate
    driver = np.where(mask, rng.exponential(1.0, size=spec.T), 0.0)
    drv_std = driver.std()
    spikes = spec.spike_amp * (driver / drv_std if drv_std > 0 else driver)
    y = spec.seasonal_amp * seasonal + spikes + 0.2 * rng.standard_normal(spec.T)

    families = [
        _family(TARGET_KEY, y[:, None], "synth:seasonal"),
        _family("spike-driver", (driver + 0.3 * rng.standard_normal(spec.T))[:, None], "synth:seasonal"),
    ]
    labels = {TARGET_KEY: Label.IRRELEVANT, "spike-driver": Label.CAUSE}
    for j in range(spec.n_confounders):
        c = seasonal + 0.3 * rng.standard_normal(spec.T)
        fam = _family(f"seasonal-load-{j}", c[:, None], "synth:seasonal")
        families.append(fam)
        labels[fam.family_key] = Label.IRRELEVANT
    n_noise = max(0, spec.n_families - len(families))
    noise = _noise_families(rng, spec, n_noise)
    families.extend(noise)
    labels.update({f.family_key: Label.IRRELEVANT for f in noise})
    return Scenario(
        kind="seasonal",
        spec=spec,
        table=FamilyTable(index, families),
        labels=labels,
        target=TARGET_KEY,
        condition=[],
        population={"seasonal_var": spec.seasonal_amp**2 / 2, "spike_var": spec.spike_amp**2},
    )


def gen_chain(spec: ScenarioSpec) -> Scenario:
    """Chain upstream -> target -> downstream with independent stage noise.

    Stage strengths give population r² of ``signal_r2`` per edge, so the
    marginal upstream/downstream r² is signal_r2² and the partial
    dependence of the two ends given the middle is exactly zero.
    """
    rng = np.random.default_rng(spec.seed)
    index = _index(spec)
    r2 = spec.signal_r2
    # edge strength fixed so that population r² per edge is signal_r2 at
    # unit noise, and saturates towards 1 as the stage noise shrinks
    v = r2 / (1 - r2)
    edge_r2 = v / (v + spec.noise**2)
    z = rng.standard_normal(spec.T)
    a = math.sqrt(v)
    y = a * z + spec.noise * rng.standard_normal(spec.T)
    var_y = v + spec.noise**2
    b = math.sqrt(v / var_y)
    x = b * y + spec.noise * rng.standard_normal(spec.T)

    families = [
        _family(TARGET_KEY, y[:, None], "synth:chain"),
        _family("upstream", z[:, None], "synth:chain"),
        _family("downstream", x[:, None], "synth:chain"),
    ]
    labels = {
        TARGET_KEY: Label.IRRELEVANT,
        "upstream": Label.CAUSE,
        "downstream": Label.EFFECT,
    }
    n_noise = max(0, spec.n_families - len(families))
    noise = _noise_families(rng, spec, n_noise)
    families.extend(noise)
    labels.update({f.family_key: Label.IRRELEVANT for f in noise})
    return Scenario(
        kind="chain",
        spec=spec,
        table=FamilyTable(index, families),
        labels=labels,
        target=TARGET_KEY,
        population={
            "r2_upstream_target": edge_r2,
            "r2_target_downstream": edge_r2,
            "r2_upstream_downstream": edge_r2 * edge_r2,
            "partial_r2_ends_given_target": 0.0,
        },
    )


GENERATORS = {
    "null": gen_null,
    "planted": gen_planted_cause,
    "joint": lambda spec: gen_planted_cause(spec),
    "seasonal": gen_seasonal_spike,
    "chain": gen_chain,
}


def generate(kind: str, spec: ScenarioSpec) -> Scenario:
    import dataclasses

    if kind not in GENERATORS:
        raise ValueError(f"unknown scenario {kind!r}; choose from {sorted(GENERATORS)}")
    if kind == "joint" and spec.joint_m <= 1:
        spec = dataclasses.replace(spec, joint_m=10)
    return GENERATORS[kind](spec)


# ---------------------------------------------------------------------------
# On-disk scenario format (records + labels), consumed by the CLI
# ---------------------------------------------------------------------------


def table_to_records(table: FamilyTable) -> list[MetricRecord]:
    """Flatten a family table to records; feature names must be series keys."""
    from .ingest import parse_series_key

    records = []
    ts = table.index.timestamps()
    for fam in table:
        for col, feature in enumerate(fam.feature_names):
            metric, tags = parse_series_key(feature)
            values = fam.matrix[:, col]
            records.extend(
                MetricRecord(ts=int(ts[i]), metric=metric, tags=tags, value=float(values[i]))
                for i in range(len(ts))
            )
    return records


def write_scenario(scenario: Scenario, out_dir: str | Path) -> Path:
    """Write records.jsonl, labels.json and meta.json for one scenario."""
    from .ingest import records_to_jsonl

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.jsonl").write_text(records_to_jsonl(table_to_records(scenario.table)))
    (out / "labels.json").write_text(
        json.dumps({k: v.value for k, v in sorted(scenario.labels.items())}, indent=2)
    )
    (out / "meta.json").write_text(
        json.dumps(
            {
                "kind": scenario.kind,
                "seed": scenario.spec.seed,
                "target": scenario.target,
                "condition": scenario.condition,
                "index": scenario.table.index.to_dict(),
                "population": scenario.population,
            },
            indent=2,
        )
    )
    return out


def load_scenario_dir(path: str | Path) -> tuple[FamilyTable, dict[str, Label], dict]:
    """Load a scenario directory back into a table, labels and meta."""
    from .ingest import parse_records
    from .query import build_family_table, evaluate_query, parse_query

    p = Path(path)
    meta = json.loads((p / "meta.json").read_text())
    labels_raw = json.loads((p / "labels.json").read_text())
    index = TimeIndex.from_dict(meta["index"])
    parsed = parse_records((p / "records.jsonl").read_text(), "jsonl")
    ast = parse_query("FAMILY BY name SELECT avg(value)")
    result = evaluate_query(ast, parsed.records, index)
    table = build_family_table(result, index, provenance="scenario")
    labels = {k: Label(v) for k, v in labels_raw.items()}
    return table, labels, meta
