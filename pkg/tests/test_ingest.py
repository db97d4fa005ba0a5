import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causerank.ingest import (
    AllMissing,
    MalformedRow,
    RawSeries,
    UnknownFormat,
    assemble_family,
    collect_series,
    interpolate_missing,
    parse_records,
    parse_series_key,
    records_to_jsonl,
)
from causerank.model import MetricRecord, TimeIndex


def test_parse_jsonl_example_row():
    row = '{"ts":0,"metric":"disk","tags":{"host":"datanode-1","type":"read_latency"},"value":3.5}'
    res = parse_records(row, "jsonl")
    assert len(res.records) == 1 and res.rejected == 0
    r = res.records[0]
    assert (r.ts, r.metric, r.value) == (0, "disk", 3.5)
    assert r.tags == {"host": "datanode-1", "type": "read_latency"}


def test_parse_csv_wide_example():
    res = parse_records("ts,cpu{host=a}\n0,1.0\n", "csv-wide")
    assert len(res.records) == 1
    r = res.records[0]
    assert (r.metric, r.tags, r.ts, r.value) == ("cpu", {"host": "a"}, 0, 1.0)


def test_parse_jsonl_nan_rejected_with_warning_count():
    rows = "\n".join(
        [
            '{"ts":0,"metric":"m","tags":{},"value":"NaN"}',
            '{"ts":1,"metric":"m","tags":{},"value":1.0}',
            '{"ts":2,"metric":"m","tags":{},"value":NaN}',
        ]
    )
    res = parse_records(rows, "jsonl")
    assert len(res.records) == 1
    assert res.rejected == 2


def test_parse_jsonl_malformed_row_has_line_number():
    with pytest.raises(MalformedRow) as e:
        parse_records('{"ts":0,"metric":"m","tags":{},"value":1}\n{oops', "jsonl")
    assert e.value.line_no == 2
    with pytest.raises(MalformedRow):
        parse_records('{"ts":0,"metric":"m","value":1}', "jsonl")  # missing tags key


def test_unknown_format():
    with pytest.raises(UnknownFormat):
        parse_records("", "parquet")


def test_csv_wide_empty_cells_and_braces():
    text = "ts,disk{host=a,type=r},mem{}\n0,1.0,\n1,,2.0\n"
    res = parse_records(text, "csv-wide")
    keys = sorted(r.series_key for r in res.records)
    assert keys == ["disk{host=a,type=r}", "mem{}"]


def test_parse_series_key():
    assert parse_series_key("cpu") == ("cpu", {})
    assert parse_series_key("cpu{}") == ("cpu", {})
    assert parse_series_key("disk{host=a,type=r}") == ("disk", {"host": "a", "type": "r"})
    with pytest.raises(ValueError):
        parse_series_key("disk{host=a")
    with pytest.raises(ValueError):
        parse_series_key("{host=a}")


def test_jsonl_round_trip():
    records = [
        MetricRecord(ts=3, metric="disk", tags={"host": "a"}, value=1.25),
        MetricRecord(ts=4, metric="cpu", tags={}, value=-2.0),
    ]
    again = parse_records(records_to_jsonl(records), "jsonl")
    assert again.records == records and again.rejected == 0


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(min_value=0, max_value=500),
            st.sampled_from(["cpu", "disk", "net"]),
            st.dictionaries(st.sampled_from(["host", "kind"]), st.sampled_from(["a", "b"]), max_size=2),
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False),
        ),
        max_size=20,
    )
)
def test_jsonl_round_trip_property(raw):
    records = [MetricRecord(ts=t, metric=m, tags=tags, value=v) for t, m, tags, v in raw]
    again = parse_records(records_to_jsonl(records), "jsonl")
    assert again.records == records


def test_interpolate_tie_takes_earlier():
    idx = TimeIndex(0, 2)
    s = RawSeries(metric="m", tags={}, points=[(0, 1.0), (2, 3.0)])
    assert interpolate_missing(s, idx).tolist() == [1.0, 1.0, 3.0]


def test_interpolate_single_observation_fills_all():
    idx = TimeIndex(0, 2)
    s = RawSeries(metric="m", tags={}, points=[(1, 5.0)])
    assert interpolate_missing(s, idx).tolist() == [5.0, 5.0, 5.0]


def test_interpolate_all_missing():
    idx = TimeIndex(0, 2)
    with pytest.raises(AllMissing):
        interpolate_missing(RawSeries(metric="m", tags={}, points=[(99, 1.0)]), idx)


def test_interpolate_idempotent_on_dense_series():
    idx = TimeIndex(0, 9)
    vals = list(np.sin(np.arange(10)))
    s = RawSeries(metric="m", tags={}, points=list(zip(range(10), vals)))
    out = interpolate_missing(s, idx)
    assert out.tolist() == vals
    again = RawSeries(metric="m", tags={}, points=list(zip(range(10), out.tolist())))
    assert interpolate_missing(again, idx).tolist() == out.tolist()


def test_collect_series_averages_duplicates():
    records = [
        MetricRecord(ts=0, metric="m", tags={}, value=1.0),
        MetricRecord(ts=0, metric="m", tags={}, value=3.0),
        MetricRecord(ts=1, metric="m", tags={}, value=5.0),
    ]
    series = collect_series(records)
    assert len(series) == 1
    assert series[0].points == [(0, 2.0), (1, 5.0)]


def test_assemble_family_shape_and_order():
    idx = TimeIndex(0, 1439)
    rng = np.random.default_rng(0)
    rows = [
        RawSeries(metric="b", tags={}, points=[(t, float(v)) for t, v in enumerate(rng.standard_normal(1440))]),
        RawSeries(metric="a", tags={}, points=[(t, float(v)) for t, v in enumerate(rng.standard_normal(1440))]),
        RawSeries(metric="c", tags={}, points=[(t, float(v)) for t, v in enumerate(rng.standard_normal(1440))]),
    ]
    fam = assemble_family(rows, "fam", idx)
    assert fam.matrix.shape == (1440, 3)
    assert fam.feature_names == ("a{}", "b{}", "c{}")


def test_assemble_family_identity_column():
    idx = TimeIndex(0, 4)
    vals = [2.0, 4.0, 6.0, 8.0, 10.0]
    rows = [RawSeries(metric="a", tags={}, points=list(zip(range(5), vals)))]
    fam = assemble_family(rows, "fam", idx)
    assert fam.matrix[:, 0].tolist() == vals


def test_assemble_family_permutation_invariant():
    idx = TimeIndex(0, 9)
    rng = np.random.default_rng(1)
    rows = [
        RawSeries(metric=name, tags={}, points=[(t, float(v)) for t, v in enumerate(rng.standard_normal(10))])
        for name in ("x", "y", "z")
    ]
    a = assemble_family(rows, "fam", idx)
    b = assemble_family(rows[::-1], "fam", idx)
    assert a.feature_names == b.feature_names
    assert np.array_equal(a.matrix, b.matrix)


def test_assemble_family_propagates_all_missing():
    idx = TimeIndex(0, 9)
    rows = [RawSeries(metric="m", tags={}, points=[(100, 1.0)])]
    with pytest.raises(AllMissing):
        assemble_family(rows, "fam", idx)
