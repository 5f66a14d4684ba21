"""Data-model tests: orders, snapshots, invariants, canonical layout."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lobkit.book import (
    ASK,
    BID,
    CANCEL,
    LIMIT,
    MARKET,
    BookError,
    EmptySideError,
    Order,
    Snapshot,
    ask_price_cols,
    ask_volume_cols,
    bid_price_cols,
    bid_volume_cols,
    flatten,
    ladder_cols,
    mid_price,
    price_cols,
    unflatten,
    validate_snapshot,
    volume_cols,
)


def make_snapshot(l=10, bid0=1383, ask0=1385, tick=0.01, vol=100):
    """A strictly valid snapshot: one-tick ladders on both sides."""
    lv = np.empty((l, 4))
    for i in range(l):
        lv[i] = ((bid0 - i) * tick, vol + i, (ask0 + i) * tick, vol + 2 * i)
    return Snapshot(levels=lv)


# ------------------------------------------------------------------- orders

def test_order_limit_requires_price_and_volume():
    Order(1, BID, LIMIT, 0, price=100, volume=5)  # ok
    with pytest.raises(BookError):
        Order(1, BID, LIMIT, 0, volume=5)
    with pytest.raises(BookError):
        Order(1, BID, LIMIT, 0, price=100)
    with pytest.raises(BookError):
        Order(1, BID, LIMIT, 0, price=0, volume=5)
    with pytest.raises(BookError):
        Order(1, BID, LIMIT, 0, price=100, volume=0)


def test_order_market_requires_volume_only():
    Order(1, ASK, MARKET, 0, volume=5)
    with pytest.raises(BookError):
        Order(1, ASK, MARKET, 0)
    with pytest.raises(BookError):
        Order(1, ASK, MARKET, 0, volume=-1)


def test_order_cancel_requires_target_only():
    Order(1, BID, CANCEL, 0, target_id=7)
    with pytest.raises(BookError):
        Order(1, BID, CANCEL, 0)
    with pytest.raises(BookError):
        Order(1, BID, CANCEL, 0, target_id=7, volume=3)


def test_order_rejects_bad_side_and_kind():
    with pytest.raises(BookError):
        Order(1, "buy", LIMIT, 0, price=1, volume=1)
    with pytest.raises(BookError):
        Order(1, BID, "stop", 0, price=1, volume=1)


# ---------------------------------------------------------------- snapshots

def test_valid_snapshot_has_no_violations():
    assert validate_snapshot(make_snapshot()) == []


def test_bid_order_violation_detected_with_magnitude():
    s = make_snapshot()
    s.levels[3, 0] = s.levels[2, 0] + 0.05  # bid level 4 above level 3
    v = validate_snapshot(s)
    kinds = {x.kind for x in v}
    assert "bid-order" in kinds
    worst = [x for x in v if x.kind == "bid-order"][0]
    assert worst.magnitude == pytest.approx(0.05)


def test_ask_order_and_cross_violations():
    s = make_snapshot()
    s.levels[1, 2] = s.levels[0, 2] - 0.01
    assert any(x.kind == "ask-order" for x in validate_snapshot(s))
    s2 = make_snapshot(bid0=1400, ask0=1399)
    assert any(x.kind == "cross" for x in validate_snapshot(s2))


def test_non_positive_violation():
    s = make_snapshot()
    s.levels[5, 1] = 0.0
    v = [x for x in validate_snapshot(s) if x.kind == "non-positive"]
    assert len(v) == 1 and v[0].level == 6


def test_mid_price_is_mean_of_best_quotes():
    s = make_snapshot(bid0=1383, ask0=1385)
    assert mid_price(s) == pytest.approx(13.84)


def test_mid_price_ignores_deep_levels():
    a = make_snapshot()
    b = make_snapshot()
    b.levels[5:, :] *= 3  # perturb deep rows only
    assert mid_price(a) == mid_price(b)


def test_mid_price_empty_snapshot_raises():
    with pytest.raises(EmptySideError):
        mid_price(Snapshot(levels=np.empty((0, 4))))


# ----------------------------------------------------------------- layout

def test_flatten_layout_field_major():
    s = make_snapshot(l=10)
    vec = flatten(s)
    assert vec.shape == (40,)
    assert np.array_equal(vec[0:10], s.levels[:, 0])  # bid prices
    assert np.array_equal(vec[10:20], s.levels[:, 1])  # bid volumes
    assert np.array_equal(vec[20:30], s.levels[:, 2])  # ask prices
    assert np.array_equal(vec[30:40], s.levels[:, 3])  # ask volumes


def test_unflatten_is_inverse_of_flatten():
    s = make_snapshot()
    assert unflatten(flatten(s), l=10) == Snapshot(levels=s.levels)


def test_unflatten_rejects_wrong_length():
    with pytest.raises(ValueError):
        unflatten(np.zeros(39), l=10)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_flatten_unflatten_roundtrip_property(l, seed):
    rng = np.random.default_rng(seed)
    s = Snapshot(levels=rng.uniform(0.01, 100, size=(l, 4)))
    back = unflatten(flatten(s), l=l)
    assert np.array_equal(back.levels, s.levels)


def test_column_helpers_partition_the_40_columns():
    l = 10
    assert np.array_equal(bid_price_cols(l), np.arange(0, 10))
    assert np.array_equal(bid_volume_cols(l), np.arange(10, 20))
    assert np.array_equal(ask_price_cols(l), np.arange(20, 30))
    assert np.array_equal(ask_volume_cols(l), np.arange(30, 40))
    every = np.sort(np.concatenate([price_cols(l), volume_cols(l)]))
    assert np.array_equal(every, np.arange(40))


def test_ladder_cols_orders_prices_ascending_on_valid_book():
    s = make_snapshot()
    vec = flatten(s)
    ladder = vec[ladder_cols(10)]
    assert np.all(np.diff(ladder) > 0)
