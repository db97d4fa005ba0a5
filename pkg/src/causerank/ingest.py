"""Parse metric records from files and assemble dense family matrices.

Two on-disk formats are supported:

* jsonl — one object per line with keys exactly ``{ts, metric, tags, value}``.
* csv-wide — first column ``ts`` (epoch minutes); every other header is a
  series in ``metric{k=v,k=v}`` syntax (empty braces allowed); empty cells
  mean a missing observation.

Missing grid slots are filled from the nearest-in-time observation, with
ties resolved to the earlier neighbour.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    CauseRankError,
    FeatureFamily,
    MetricRecord,
    TimeIndex,
    canonical_series_key,
)

JSONL = "jsonl"
CSV_WIDE = "csv-wide"


class MalformedRow(CauseRankError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class UnknownFormat(CauseRankError):
    pass


class AllMissing(CauseRankError):
    def __init__(self, key: str):
        super().__init__(f"series {key!r} has no observation inside the time range")
        self.key = key


@dataclass
class RawSeries:
    """Sparse staging form of one univariate series.

    Points are (ts, value), sorted ascending with unique timestamps.
    """

    metric: str
    tags: dict[str, str]
    points: list[tuple[int, float]] = field(default_factory=list)

    @property
    def key(self) -> str:
        return canonical_series_key(self.metric, self.tags)


@dataclass
class ParseResult:
    records: list[MetricRecord]
    rejected: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def parse_series_key(text: str) -> tuple[str, dict[str, str]]:
    """Parse ``metric{k=v,k=v}`` (or a bare metric name) into name + tags."""
    text = text.strip()
    if "{" not in text:
        if "}" in text or not text:
            raise ValueError(f"bad series key {text!r}")
        return text, {}
    if not text.endswith("}"):
        raise ValueError(f"bad series key {text!r}")
    metric, inner = text[:-1].split("{", 1)
    if not metric:
        raise ValueError(f"bad series key {text!r}: empty metric")
    tags: dict[str, str] = {}
    if inner:
        for part in inner.split(","):
            if "=" not in part:
                raise ValueError(f"bad tag {part!r} in {text!r}")
            k, v = part.split("=", 1)
            k = k.strip()
            if not k or k in tags:
                raise ValueError(f"bad or duplicate tag key in {text!r}")
            tags[k] = v.strip()
    return metric, tags


def _coerce_finite(raw) -> float | None:
    """Return the value as a float, or None when it is not finite."""
    try:
        v = float(raw)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def _parse_jsonl(lines) -> ParseResult:
    records: list[MetricRecord] = []
    rejected = 0
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRow(line_no, f"invalid JSON ({e.msg})") from None
        if not isinstance(obj, dict) or set(obj) != {"ts", "metric", "tags", "value"}:
            raise MalformedRow(line_no, "keys must be exactly {ts, metric, tags, value}")
        if not isinstance(obj["tags"], dict):
            raise MalformedRow(line_no, "tags must be an object")
        try:
            ts = int(obj["ts"])
            metric = str(obj["metric"])
            tags = {str(k): str(v) for k, v in obj["tags"].items()}
        except (TypeError, ValueError) as e:
            raise MalformedRow(line_no, str(e)) from None
        if not metric:
            raise MalformedRow(line_no, "metric must be non-empty")
        value = _coerce_finite(obj["value"])
        if value is None:
            rejected += 1
            continue
        records.append(MetricRecord(ts=ts, metric=metric, tags=tags, value=value))
    return ParseResult(records, rejected)


def _parse_csv_wide(lines) -> ParseResult:
    it = iter(enumerate(lines, start=1))
    header = None
    for line_no, line in it:
        if line.strip():
            header = (line_no, line.strip())
            break
    if header is None:
        return ParseResult([], 0)
    cols = [c.strip() for c in header[1].split(",")]
    # tags contain commas, so re-join split fragments until braces balance
    merged: list[str] = []
    for c in cols:
        if merged and merged[-1].count("{") > merged[-1].count("}"):
            merged[-1] += "," + c
        else:
            merged.append(c)
    if not merged or merged[0] != "ts":
        raise MalformedRow(header[0], 'csv-wide header must start with "ts"')
    try:
        series_cols = [parse_series_key(c) for c in merged[1:]]
    except ValueError as e:
        raise MalformedRow(header[0], str(e)) from None

    records: list[MetricRecord] = []
    rejected = 0
    for line_no, line in it:
        if not line.strip():
            continue
        cells = _split_csv_row(line.rstrip("\n"))
        if len(cells) != len(merged):
            raise MalformedRow(line_no, f"expected {len(merged)} cells, got {len(cells)}")
        try:
            ts = int(cells[0])
        except ValueError:
            raise MalformedRow(line_no, f"bad timestamp {cells[0]!r}") from None
        for (metric, tags), cell in zip(series_cols, cells[1:]):
            cell = cell.strip()
            if cell == "":
                continue  # missing observation
            value = _coerce_finite(cell)
            if value is None:
                rejected += 1
                continue
            records.append(MetricRecord(ts=ts, metric=metric, tags=tags, value=value))
    return ParseResult(records, rejected)


def _split_csv_row(line: str) -> list[str]:
    # data rows have no quoting or embedded commas; header commas inside
    # braces are handled separately
    return line.split(",")


def parse_records(data, fmt: str = JSONL) -> ParseResult:
    """Parse a byte/str stream of records; non-finite values are counted, not fatal."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines() if isinstance(data, str) else list(data)
    if fmt == JSONL:
        return _parse_jsonl(lines)
    if fmt == CSV_WIDE:
        return _parse_csv_wide(lines)
    raise UnknownFormat(f"unknown format {fmt!r}; expected {JSONL!r} or {CSV_WIDE!r}")


def records_to_jsonl(records) -> str:
    """Serialize records to the jsonl wire format (round-trips with parse_records)."""
    out = []
    for r in records:
        out.append(
            json.dumps(
                {"ts": r.ts, "metric": r.metric, "tags": dict(r.tags), "value": r.value},
                sort_keys=False,
            )
        )
    return "\n".join(out) + ("\n" if out else "")


def collect_series(records) -> list[RawSeries]:
    """Group records into RawSeries; duplicate (metric, tags, ts) values are averaged."""
    by_key: dict[str, RawSeries] = {}
    acc: dict[tuple[str, int], tuple[float, int]] = {}
    for r in records:
        key = r.series_key
        if key not in by_key:
            by_key[key] = RawSeries(metric=r.metric, tags=dict(r.tags))
        total, n = acc.get((key, r.ts), (0.0, 0))
        acc[(key, r.ts)] = (total + r.value, n + 1)
    for (key, ts), (total, n) in acc.items():
        by_key[key].points.append((ts, total / n))
    for s in by_key.values():
        s.points.sort()
    return list(by_key.values())


def interpolate_missing(series: RawSeries, index: TimeIndex) -> np.ndarray:
    """Fill every grid slot from the nearest-in-time observation.

    Exact-timestamp observations pass through unchanged; an equidistant tie
    picks the earlier neighbour.  Observations outside the index range do
    not count; AllMissing is raised when none fall inside it.
    """
    return interpolate_points(series.points, index, series.key)


def interpolate_points(
    points: list[tuple[int, float]], index: TimeIndex, key: str = "?"
) -> np.ndarray:
    """Nearest-non-null fill of sorted (ts, value) points onto the grid."""
    grid = index.timestamps()
    pts = [(ts, v) for ts, v in points if index.start_ts <= ts <= index.end_ts]
    if not pts:
        raise AllMissing(key)
    obs_ts = np.array([p[0] for p in pts], dtype=np.int64)
    obs_v = np.array([p[1] for p in pts], dtype=np.float64)
    right = np.searchsorted(obs_ts, grid, side="left")
    left = right - 1
    left_ok = left >= 0
    right_ok = right < len(obs_ts)
    d_left = np.where(left_ok, grid - obs_ts[np.clip(left, 0, None)], np.iinfo(np.int64).max)
    d_right = np.where(
        right_ok, obs_ts[np.clip(right, None, len(obs_ts) - 1)] - grid, np.iinfo(np.int64).max
    )
    take_left = d_left <= d_right  # tie -> earlier neighbour
    idx = np.where(take_left, np.clip(left, 0, None), np.clip(right, None, len(obs_ts) - 1))
    return obs_v[idx]


def assemble_family(
    rows: list[RawSeries],
    key: str,
    index: TimeIndex,
    provenance: str = "",
) -> FeatureFamily:
    """Build a dense T x F family matrix, columns ordered by feature name."""
    if not rows:
        raise ValueError(f"family {key!r}: need at least one series")
    ordered = sorted(rows, key=lambda s: s.key)
    names = tuple(s.key for s in ordered)
    cols = [interpolate_missing(s, index) for s in ordered]
    matrix = np.ascontiguousarray(np.column_stack(cols))
    return FeatureFamily(family_key=key, feature_names=names, matrix=matrix, provenance=provenance)
