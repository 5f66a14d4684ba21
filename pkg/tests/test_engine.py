"""Matching-engine tests: worked examples, conservation fuzz, determinism."""

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
    BookState,
    DepthError,
    EmptySideError,
    Order,
)
from lobkit.engine import step, submit, top_levels


def seeded_book(levels=12, bid0=1000, ask0=1001, vol=50):
    book = BookState()
    oid = 1
    for i in range(levels):
        submit(book, Order(oid, BID, LIMIT, 0, price=bid0 - i, volume=vol))
        oid += 1
        submit(book, Order(oid, ASK, LIMIT, 0, price=ask0 + i, volume=vol))
        oid += 1
    return book, oid


# ------------------------------------------------------------ worked cases

def test_limit_rests_when_not_crossing():
    book = BookState()
    _, ev = submit(book, Order(1, BID, LIMIT, 0, price=100, volume=10))
    assert [e.kind for e in ev] == ["rest"]
    assert book.best_bid() == 100 and book.bids[100].total_volume == 10


def test_crossing_limit_trades_at_maker_price_then_rests_remainder():
    book = BookState()
    submit(book, Order(1, ASK, LIMIT, 0, price=101, volume=50))
    _, ev = submit(book, Order(2, BID, LIMIT, 1, price=102, volume=80))
    kinds = [e.kind for e in ev]
    assert kinds == ["trade", "rest"]
    tr = ev[0].trade
    assert (tr.price, tr.volume, tr.maker_id, tr.taker_id) == (101, 50, 1, 2)
    # remainder rests at the taker's own limit price
    assert ev[1].price == 102 and ev[1].volume == 30
    assert book.best_bid() == 102 and book.best_ask() is None


def test_fifo_within_price_level():
    book = BookState()
    submit(book, Order(1, ASK, LIMIT, 0, price=101, volume=30))
    submit(book, Order(2, ASK, LIMIT, 1, price=101, volume=30))
    _, ev = submit(book, Order(3, BID, MARKET, 2, volume=40))
    trades = [(e.trade.maker_id, e.trade.volume) for e in ev if e.kind == "trade"]
    assert trades == [(1, 30), (2, 10)]  # earlier arrival filled first


def test_market_sweeps_best_first_and_discards_remainder():
    book = BookState()
    submit(book, Order(1, ASK, LIMIT, 0, price=102, volume=10))
    submit(book, Order(2, ASK, LIMIT, 0, price=101, volume=10))
    _, ev = submit(book, Order(3, BID, MARKET, 1, volume=30))
    prices = [e.trade.price for e in ev if e.kind == "trade"]
    assert prices == [101, 102]
    unfilled = [e for e in ev if e.kind == "market_unfilled"]
    assert len(unfilled) == 1 and unfilled[0].volume == 10
    assert not book.asks  # nothing rested, remainder discarded


def test_cancel_removes_full_remaining_volume():
    book = BookState()
    submit(book, Order(1, BID, LIMIT, 0, price=100, volume=40))
    submit(book, Order(2, ASK, LIMIT, 1, price=100, volume=15))  # partial fill
    _, ev = submit(book, Order(3, BID, CANCEL, 2, target_id=1))
    assert [e.kind for e in ev] == ["cancel_ok"]
    assert ev[0].volume == 25  # the remaining, not the original, volume
    assert not book.bids


def test_cancel_miss_for_unknown_or_filled_order():
    book = BookState()
    _, ev = submit(book, Order(1, BID, CANCEL, 0, target_id=99))
    assert [e.kind for e in ev] == ["cancel_miss"]
    submit(book, Order(2, ASK, LIMIT, 1, price=101, volume=10))
    submit(book, Order(3, BID, LIMIT, 2, price=101, volume=10))  # fills 2
    _, ev = submit(book, Order(4, ASK, CANCEL, 3, target_id=2))
    assert [e.kind for e in ev] == ["cancel_miss"]


def test_stale_timestamp_rejected():
    book = BookState()
    submit(book, Order(1, BID, LIMIT, 10, price=100, volume=1))
    with pytest.raises(BookError):
        submit(book, Order(2, BID, LIMIT, 9, price=100, volume=1))


def test_step_equals_sequential_submit():
    orders = [
        Order(1, BID, LIMIT, 0, price=100, volume=10),
        Order(2, ASK, LIMIT, 1, price=101, volume=5),
        Order(3, BID, MARKET, 2, volume=3),
        Order(4, ASK, CANCEL, 3, target_id=2),
    ]
    b1 = BookState()
    ev1 = []
    for o in orders:
        _, ev = submit(b1, o)
        ev1.extend(ev)
    b2, ev2 = step(BookState(), orders)
    assert ev1 == ev2
    assert b1.bids.keys() == b2.bids.keys()
    assert b1.asks.keys() == b2.asks.keys()


# ------------------------------------------------------------- top_levels

def test_top_levels_exports_real_units_best_first():
    book, _ = seeded_book(levels=12)
    s = top_levels(book, 10)
    assert s.l == 10
    assert s.levels[0, 0] == pytest.approx(10.00)
    assert s.levels[0, 2] == pytest.approx(10.01)
    assert np.all(np.diff(s.levels[:, 0]) < 0)  # bids descending
    assert np.all(np.diff(s.levels[:, 2]) > 0)  # asks ascending


def test_top_levels_aggregates_level_volume():
    book = BookState()
    submit(book, Order(1, BID, LIMIT, 0, price=100, volume=10))
    submit(book, Order(2, BID, LIMIT, 0, price=100, volume=7))
    submit(book, Order(3, ASK, LIMIT, 0, price=101, volume=4))
    s = top_levels(book, 1)
    assert s.levels[0, 1] == 17


def test_top_levels_depth_error_carries_available_depth():
    book, _ = seeded_book(levels=3)
    with pytest.raises(DepthError) as exc:
        top_levels(book, 10)
    assert exc.value.available == 3 and exc.value.requested == 10


def test_top_levels_empty_side():
    book = BookState()
    submit(book, Order(1, BID, LIMIT, 0, price=100, volume=1))
    with pytest.raises(EmptySideError):
        top_levels(book, 1)


# ------------------------------------------------------------------- fuzz

def random_stream(seed, n):
    """A random but always-submittable order stream around price 1000."""
    rng = np.random.default_rng(seed)
    book = BookState()
    orders = []
    oid = 1
    for t in range(n):
        kind = rng.choice([LIMIT, MARKET, CANCEL], p=[0.7, 0.15, 0.15])
        side = BID if rng.random() < 0.5 else ASK
        if kind == CANCEL:
            if not book.live:
                continue
            target = list(book.live)[rng.integers(len(book.live))]
            o = Order(oid, side, CANCEL, t, target_id=target)
        elif kind == MARKET:
            o = Order(oid, side, MARKET, t, volume=int(rng.integers(1, 50)))
        else:
            price = int(1000 + rng.integers(-20, 21))
            o = Order(oid, side, LIMIT, t, price=price,
                      volume=int(rng.integers(1, 50)))
        oid += 1
        submit(book, o)
        orders.append(o)
    return orders


def replay(orders):
    book = BookState()
    events = []
    for o in orders:
        _, ev = submit(book, o)
        events.extend(ev)
    return book, events


def conservation(orders, book, events):
    side_of = {o.id: o.side for o in orders}
    target_of = {o.id: o.target_id for o in orders if o.kind == CANCEL}
    sub = {BID: 0, ASK: 0}
    out = {BID: 0, ASK: 0}
    for o in orders:
        if o.kind in (LIMIT, MARKET):
            sub[o.side] += o.volume
    for e in events:
        if e.kind == "trade":
            out[side_of[e.trade.taker_id]] += e.trade.volume
            out[side_of[e.trade.maker_id]] += e.trade.volume
        elif e.kind == "cancel_ok":
            out[side_of[target_of[e.order_id]]] += e.volume
        elif e.kind == "market_unfilled":
            out[side_of[e.order_id]] += e.volume
    for lvl in book.bids.values():
        out[BID] += lvl.total_volume
    for lvl in book.asks.values():
        out[ASK] += lvl.total_volume
    return sub, out


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(50, 400))
def test_fuzz_conservation_no_cross_determinism(seed, n):
    orders = random_stream(seed, n)
    book, events = replay(orders)
    book.check_invariants()  # includes the no-cross check
    sub, out = conservation(orders, book, events)
    assert sub == out
    # byte-for-byte determinism of a second replay
    book2, events2 = replay(orders)
    assert events == events2
    assert sorted(book.live) == sorted(book2.live)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fuzz_price_time_priority(seed):
    """Every trade hits the best opposite price, FIFO within the level."""
    orders = random_stream(seed, 200)
    book = BookState()
    for o in orders:
        # snapshot the opposite-side queues before the order is applied
        before = {
            side: {p: [e[0] for e in lvl.queue] for p, lvl in levels.items()}
            for side, levels in ((BID, book.bids), (ASK, book.asks))
        }
        _, ev = submit(book, o)
        trades = [e.trade for e in ev if e.kind == "trade"]
        if trades and o.kind in (LIMIT, MARKET):
            opp = ASK if o.side == BID else BID
            # first trade must be at the pre-submit best opposite price
            best = min(before[opp]) if opp == ASK else max(before[opp])
            assert trades[0].price == best
            # trade prices never improve backwards for the maker side
            prices = [t.price for t in trades]
            assert prices == sorted(prices, reverse=(opp == BID))
            # maker sequence within one price level must be FIFO
            for price in set(prices):
                makers = [t.maker_id for t in trades if t.price == price]
                # consecutive duplicates collapse (maker filled in one go here)
                assert makers == before[opp][price][: len(makers)]
