"""Sampling-grid tests: calendar arithmetic, latest-at-or-before semantics,
forward fill, auction filtering, thin-book padding."""

import numpy as np
import pytest

from lobkit.book import ASK, BID, LIMIT, BookState, Order, validate_snapshot
from lobkit.engine import submit
from lobkit.sampling import (
    NS_PER_SEC,
    DaySeries,
    SamplingError,
    SessionCalendar,
    filter_auction,
    forward_fill,
    hms,
    sample,
    snapshot_padded,
)
from tests.test_book import make_snapshot


def tiny_calendar(start=0, seconds=30, period=3):
    return SessionCalendar(
        intervals=((start, start + seconds * NS_PER_SEC),),
        period=period * NS_PER_SEC,
    )


def seed_orders(n_levels=12, bid0=1000, t=0):
    orders = []
    oid = 1
    for i in range(n_levels):
        orders.append(Order(oid, BID, LIMIT, t, price=bid0 - i, volume=10))
        oid += 1
        orders.append(Order(oid, ASK, LIMIT, t, price=bid0 + 1 + i, volume=10))
        oid += 1
    return orders, oid


# ----------------------------------------------------------------- calendar

def test_default_calendar_has_4740_points():
    cal = SessionCalendar()
    assert cal.points_per_day == 4740
    grid = cal.grid()
    assert len(grid) == 4740
    assert grid[0] == hms(9, 30)
    assert grid[2399] == hms(11, 30) - 3 * NS_PER_SEC
    assert grid[2400] == hms(13, 0)
    assert grid[-1] == hms(14, 57) - 3 * NS_PER_SEC
    assert np.all(np.diff(grid[:2400]) == 3 * NS_PER_SEC)
    assert np.all(np.diff(grid[2400:]) == 3 * NS_PER_SEC)


def test_calendar_contains_half_open():
    cal = SessionCalendar()
    assert cal.contains(hms(9, 30))
    assert not cal.contains(hms(9, 30) - 1)
    assert not cal.contains(hms(11, 30))
    assert cal.contains(hms(11, 30) - 1)
    assert cal.contains(hms(13, 0))
    assert not cal.contains(hms(14, 57))
    assert not cal.contains(hms(12, 0))


def test_calendar_rejects_overlapping_or_indivisible_intervals():
    with pytest.raises(SamplingError):
        SessionCalendar(intervals=((0, 10 * NS_PER_SEC), (5 * NS_PER_SEC, 20 * NS_PER_SEC)))
    with pytest.raises(SamplingError):
        SessionCalendar(intervals=((0, 10 * NS_PER_SEC),), period=3 * NS_PER_SEC)


# ------------------------------------------------------------------- sample

def test_sample_takes_latest_state_at_or_before_each_grid_point():
    cal = tiny_calendar(seconds=9)  # grid points at t = 0, 3, 6 s
    orders, oid = seed_orders()
    # at exactly t=3s a new best bid appears; at 4s (between grids) another
    orders.append(Order(oid, BID, LIMIT, 3 * NS_PER_SEC, price=1000, volume=5))
    orders.append(
        Order(oid + 1, ASK, LIMIT, 4 * NS_PER_SEC, price=1001, volume=5)
    )
    series, _ = sample(BookState(), orders, cal, l=3)
    assert len(series) == 3
    assert np.array_equal(series.times, cal.grid())
    # t=0: seed book; t=3: includes the order stamped exactly at the grid
    assert series.snapshot(0).levels[0, 1] == 10
    assert series.snapshot(1).levels[0, 1] == 15
    # t=6: the 4s order is included (latest at or before)
    assert series.snapshot(2).levels[0, 3] == 15


def test_sample_quiet_periods_repeat_previous_state():
    cal = tiny_calendar(seconds=15)
    orders, _ = seed_orders()
    series, _ = sample(BookState(), orders, cal, l=3)
    assert len(series) == 5
    for i in range(1, 5):
        assert np.array_equal(series.data[i], series.data[0])


def test_sample_unseeded_book_raises():
    cal = tiny_calendar(seconds=9)
    with pytest.raises(SamplingError):
        sample(BookState(), [], cal, l=3)


def test_sample_snapshots_are_valid_even_when_sides_go_thin():
    cal = tiny_calendar(seconds=9)
    orders, oid = seed_orders(n_levels=2)  # thinner than l=5 -> padding
    series, _ = sample(BookState(), orders, cal, l=5)
    for i in range(len(series)):
        assert validate_snapshot(series.snapshot(i)) == []


def test_day_series_roundtrip_and_mid_prices():
    snaps = [make_snapshot(bid0=1383 + i, ask0=1385 + i) for i in range(4)]
    series = DaySeries.from_snapshots("demo", 0, snaps)
    assert len(series) == 4
    assert series.snapshot(2) == snaps[2]
    assert np.allclose(series.mid_prices(), [13.84 + 0.01 * i for i in range(4)])


# ------------------------------------------------------------ forward fill

def test_forward_fill_replaces_gaps_with_previous_snapshot():
    a, b = make_snapshot(), make_snapshot(bid0=1390, ask0=1392)
    series = forward_fill([a, None, None, b, None])
    assert series.snapshot(1) == a
    assert series.snapshot(2) == a
    assert series.snapshot(4) == b


def test_forward_fill_leading_gap_is_an_error():
    with pytest.raises(SamplingError):
        forward_fill([None, make_snapshot()])
    with pytest.raises(SamplingError):
        forward_fill([])


# --------------------------------------------------------- auction filter

def test_filter_auction_drops_out_of_session_snapshots():
    def at(t):
        s = make_snapshot()
        return type(s)(levels=s.levels, time=t)

    snaps = [
        at(hms(9, 20)),        # pre-open: dropped
        at(hms(9, 30)),        # first session instant: kept
        at(hms(11, 29, 59)),   # kept
        at(hms(11, 30)),       # session end (exclusive): dropped
        at(hms(12, 15)),       # lunch: dropped
        at(hms(13, 0)),        # kept
        at(hms(14, 56, 59)),   # kept
        at(hms(14, 58)),       # post-close: dropped
    ]
    kept = filter_auction(snaps)
    assert [s.time for s in kept] == [
        hms(9, 30), hms(11, 29, 59), hms(13, 0), hms(14, 56, 59)
    ]


# ----------------------------------------------------------------- padding

def test_snapshot_padded_extends_one_tick_past_worst_level():
    book = BookState()
    submit(book, Order(1, BID, LIMIT, 0, price=1000, volume=9))
    submit(book, Order(2, ASK, LIMIT, 0, price=1001, volume=9))
    s = snapshot_padded(book, l=3)
    assert validate_snapshot(s) == []
    assert np.allclose(s.levels[:, 0], [10.00, 9.99, 9.98])
    assert np.allclose(s.levels[:, 2], [10.01, 10.02, 10.03])
    assert np.allclose(s.levels[1:, 1], 1)  # padded rows carry volume 1
    assert s.levels[0, 1] == 9


def test_snapshot_padded_one_sided_book_raises():
    book = BookState()
    submit(book, Order(1, BID, LIMIT, 0, price=1000, volume=9))
    with pytest.raises(SamplingError):
        snapshot_padded(book, l=3)
