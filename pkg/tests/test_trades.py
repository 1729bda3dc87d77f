import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbvar.errors import DegenerateSeries, EmptyBucket, NonPositiveField, ParseError, UnsortedInput
from mbvar.trades import (
    AlignedSeries,
    AveragingWindow,
    PortfolioSpec,
    TradeTick,
    align_to_grid,
    parse_time,
    read_portfolio,
    read_trades,
    validate_ticks,
    write_portfolio,
    write_trades,
)


def test_tick_price_is_value_over_volume():
    (tick,) = validate_ticks([TradeTick(1.0, "A", 10.0, 5.0)])
    assert tick.price == 2.0


@pytest.mark.parametrize("value,volume", [(0.0, 5.0), (10.0, 0.0), (-1.0, 1.0), (math.nan, 1.0), (1.0, math.inf)])
def test_non_positive_or_non_finite_tick_rejected(value, volume):
    with pytest.raises(NonPositiveField):
        validate_ticks([TradeTick(1.0, "A", value, volume)])


def test_ticks_sorted_ascending():
    ticks = [TradeTick(2.0, "A", 1.0, 1.0), TradeTick(1.0, "A", 2.0, 1.0)]
    assert [t.time for t in validate_ticks(ticks)] == [1.0, 2.0]


def test_strict_order_raises_on_unsorted():
    ticks = [TradeTick(2.0, "A", 1.0, 1.0), TradeTick(1.0, "A", 2.0, 1.0)]
    with pytest.raises(UnsortedInput):
        validate_ticks(ticks, strict_order=True)


def test_window_geometry():
    w = AveragingWindow(2.5, 4.0, 2)
    assert (w.start, w.end, w.bucket_width) == (0.5, 4.5, 2.0)
    assert w.edges().tolist() == [0.5, 2.5, 4.5]


@pytest.mark.parametrize("kwargs", [dict(center=0, width=1, buckets=1), dict(center=0, width=0, buckets=2)])
def test_window_rejects_degenerate(kwargs):
    with pytest.raises((DegenerateSeries, ValueError)):
        AveragingWindow(**kwargs)


def test_alignment_interval_membership():
    ticks = [TradeTick(float(t), "A", 1.0, 1.0) for t in (1, 2, 3, 4)]
    al = align_to_grid(ticks, AveragingWindow(2.5, 4.0, 2), ["A"])
    assert al["A"].volumes.tolist() == [2.0, 2.0]


def test_alignment_bucket_sums():
    ticks = [
        TradeTick(1.0, "A", 2.0, 1.0),
        TradeTick(2.0, "A", 4.0, 1.0),
        TradeTick(3.0, "A", 6.0, 1.0),
        TradeTick(4.0, "A", 8.0, 1.0),
    ]
    al = align_to_grid(ticks, AveragingWindow(2.5, 4.0, 2), ["A"])
    assert al["A"].buckets == [(6.0, 2.0), (14.0, 2.0)]


def test_last_bucket_closed_on_right_and_outside_ignored():
    ticks = [TradeTick(0.0, "A", 1.0, 1.0), TradeTick(1.0, "A", 2.0, 1.0), TradeTick(2.0, "A", 3.0, 1.0),
             TradeTick(2.5, "A", 100.0, 1.0)]
    al = align_to_grid(ticks, AveragingWindow(1.0, 2.0, 2), ["A"])
    assert al["A"].values.tolist() == [1.0, 5.0]


def test_strict_empty_bucket():
    ticks = [TradeTick(1.0, "A", 1.0, 1.0), TradeTick(1.2, "A", 1.0, 1.0)]
    with pytest.raises(EmptyBucket) as info:
        align_to_grid(ticks, AveragingWindow(2.5, 4.0, 2), ["A"])
    assert (info.value.security_id, info.value.bucket) == ("A", 1)


def test_lenient_merges_left_and_reports():
    times = [0.5, 1.5, 3.5]
    ticks = [TradeTick(t, "A", 2.0, 1.0) for t in times] + [TradeTick(t, "B", 3.0, 1.0) for t in times]
    al = align_to_grid(ticks, AveragingWindow(2.0, 4.0, 4), ["A", "B"], strict=False)
    assert al.merged_buckets == (2,)
    assert al.effective_buckets == 3
    assert al["A"].volumes.tolist() == [1.0, 1.0, 1.0]
    assert al.edges.tolist() == [0.0, 1.0, 3.0, 4.0]


def test_lenient_first_bucket_merges_right():
    ticks = [TradeTick(t, "A", 2.0, 1.0) for t in (1.5, 2.5, 3.5)]
    al = align_to_grid(ticks, AveragingWindow(2.0, 4.0, 4), ["A"], strict=False)
    assert al["A"].volumes.tolist() == [1.0, 1.0, 1.0]
    assert al.effective_buckets == 3


tick_lists = st.lists(
    st.tuples(
        st.floats(0.0, 10.0),
        st.sampled_from(["A", "B"]),
        st.floats(1e-3, 1e3),
        st.floats(1e-3, 1e3),
    ),
    min_size=1,
    max_size=60,
)


@settings(max_examples=200, deadline=None)
@given(tick_lists, st.integers(2, 6), st.randoms(use_true_random=False))
def test_alignment_preserves_totals_permutation_and_bounds(raw, n, rnd):
    pad = [(t, s, 1.0, 1.0) for t in np.linspace(0.0, 10.0, 2 * n + 1) for s in ("A", "B")]
    ticks = [TradeTick(*r) for r in raw + pad]
    window = AveragingWindow(5.0, 10.0, n)
    al = align_to_grid(ticks, window, ["A", "B"])
    shuffled = list(ticks)
    rnd.shuffle(shuffled)
    al2 = align_to_grid(shuffled, window, ["A", "B"])
    edges = window.edges()
    for sid in ("A", "B"):
        mine = [t for t in ticks if t.security_id == sid]
        assert al[sid].values.sum() == pytest.approx(math.fsum(t.value for t in mine), rel=1e-12)
        assert al[sid].volumes.sum() == pytest.approx(math.fsum(t.volume for t in mine), rel=1e-12)
        assert np.array_equal(al[sid].values, al2[sid].values)
        for i in range(n):
            inside = [t.price for t in mine if edges[i] <= t.time < edges[i + 1] or (i == n - 1 and t.time == edges[-1])]
            p = al[sid].prices[i]
            assert min(inside) * (1 - 1e-12) <= p <= max(inside) * (1 + 1e-12)


def test_portfolio_spec_weights():
    spec = PortfolioSpec(0.0, {"A": 3.0, "B": 1.0}, {"A": 2.0, "B": 4.0})
    assert spec.price == 2.5
    assert spec.share_weights() == {"A": 0.75, "B": 0.25}
    assert spec.value_weights() == {"A": 0.6, "B": 0.4}


@pytest.mark.parametrize("holding,price", [(0.0, 1.0), (1.0, -2.0)])
def test_portfolio_spec_rejects_non_positive(holding, price):
    with pytest.raises(NonPositiveField):
        PortfolioSpec(0.0, {"A": holding}, {"A": price})


def test_aligned_series_rejects_non_positive():
    with pytest.raises(NonPositiveField):
        AlignedSeries("A", np.array([1.0, 0.0]), np.array([1.0, 1.0]))


def test_parse_time_epoch_and_iso():
    assert parse_time("1.5") == 1.5
    assert parse_time("1970-01-01T00:00:10Z") == 10.0
    assert parse_time("1970-01-01T00:00:10") == 10.0
    with pytest.raises(ParseError):
        parse_time("yesterday")


def test_trades_csv_roundtrip(tmp_path):
    ticks = [TradeTick(0.1, "A", 1 / 3, 2 / 7), TradeTick(0.2, "B", 1e-300, 5e10)]
    path = tmp_path / "t.csv"
    write_trades(ticks, path)
    assert read_trades(path) == ticks


def test_price_quoted_csv_and_jsonl(tmp_path):
    csv_path = tmp_path / "p.csv"
    csv_path.write_text("time,security,price,volume\n1970-01-01T00:00:01Z,A,2.5,4\n")
    assert read_trades(csv_path) == [TradeTick(1.0, "A", 10.0, 4.0)]
    jl = tmp_path / "t.jsonl"
    jl.write_text(json.dumps({"time": 3, "security": "B", "value": 6, "volume": 2}) + "\n\n")
    assert read_trades(jl) == [TradeTick(3.0, "B", 6.0, 2.0)]


@pytest.mark.parametrize(
    "text",
    [
        "time,security,volume\n1,A,1\n",
        "time,security,value,volume\n1,A,abc,1\n",
        "time,security,value,volume\n1,A,1,1\n1970-01-01T00:00:00Z,A,1,1\n",
    ],
)
def test_bad_trade_files(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError):
        read_trades(path)


def test_portfolio_roundtrip(tmp_path):
    spec = PortfolioSpec(5.0, {"B": 2.0, "A": 1 / 3}, {"B": 7.25, "A": 1.1})
    path = tmp_path / "p.yaml"
    write_portfolio(spec, path)
    back = read_portfolio(path)
    assert back == spec
    assert back.securities == ("B", "A")


@pytest.mark.parametrize(
    "text",
    [
        "securities:\n  - {id: A, shares: 1}\n",
        "securities:\n  - {id: A, shares: 1, price: 1}\n  - {id: A, shares: 2, price: 1}\n",
        "just text",
        "securities: [\n",
    ],
)
def test_bad_portfolio_files(tmp_path, text):
    path = tmp_path / "p.yaml"
    path.write_text(text)
    with pytest.raises(ParseError):
        read_portfolio(path)
