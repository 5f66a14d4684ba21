"""Continuous double auction matching with price-time priority.

Limit orders match against the opposite side while they cross, at the resting
(maker) order's price, earliest arrival first within a level; any remainder
rests. Market orders sweep the opposite side best-first and discard whatever
cannot fill. Cancels remove the target's full remaining volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .book import (
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
    PriceLevel,
    Snapshot,
)


@dataclass(frozen=True)
class Trade:
    """One execution: taker lifted maker at the maker's resting price."""

    taker_id: int
    maker_id: int
    price: int
    volume: int
    timestamp: int


@dataclass(frozen=True)
class EngineEvent:
    kind: str  # trade | rest | cancel_ok | cancel_miss | market_unfilled
    order_id: int
    trade: Trade | None = None
    price: int | None = None
    volume: int | None = None


def _match(book: BookState, o: Order, events: list[EngineEvent]) -> int:
    """Sweep the opposite side while o crosses; returns unfilled volume."""
    opposite = ASK if o.side == BID else BID
    levels = book.side_levels(opposite)
    remaining = o.volume
    while remaining > 0 and levels:
        best = min(levels) if opposite == ASK else max(levels)
        if o.kind == LIMIT:
            crosses = best <= o.price if o.side == BID else best >= o.price
            if not crosses:
                break
        lvl = levels[best]
        while remaining > 0 and lvl.queue:
            entry = lvl.queue[0]
            take = min(remaining, entry[1])
            entry[1] -= take
            lvl.total_volume -= take
            remaining -= take
            trade = Trade(o.id, entry[0], best, take, o.timestamp)
            events.append(EngineEvent("trade", o.id, trade=trade))
            if entry[1] == 0:
                lvl.queue.popleft()
                book.live.pop(entry[0], None)
        if lvl.total_volume == 0:
            del levels[best]
    return remaining


def submit(book: BookState, o: Order) -> tuple[BookState, list[EngineEvent]]:
    """Apply one order; mutates and returns the book plus its events."""
    if book.clock is not None and o.timestamp < book.clock:
        raise BookError(
            f"stale timestamp {o.timestamp} < book clock {book.clock}"
        )
    book.clock = o.timestamp
    events: list[EngineEvent] = []

    if o.kind == CANCEL:
        loc = book.live.pop(o.target_id, None)
        if loc is None:
            events.append(EngineEvent("cancel_miss", o.id))
            return book, events
        side, price = loc
        lvl = book.side_levels(side)[price]
        for i, entry in enumerate(lvl.queue):
            if entry[0] == o.target_id:
                lvl.total_volume -= entry[1]
                events.append(
                    EngineEvent("cancel_ok", o.id, price=price, volume=entry[1])
                )
                del lvl.queue[i]
                break
        if lvl.total_volume == 0:
            del book.side_levels(side)[price]
        return book, events

    remaining = _match(book, o, events)

    if remaining > 0:
        if o.kind == MARKET:
            events.append(
                EngineEvent("market_unfilled", o.id, volume=remaining)
            )
        else:
            levels = book.side_levels(o.side)
            lvl = levels.get(o.price)
            if lvl is None:
                lvl = levels[o.price] = PriceLevel(price=o.price)
            lvl.append(o.id, remaining)
            book.live[o.id] = (o.side, o.price)
            events.append(
                EngineEvent("rest", o.id, price=o.price, volume=remaining)
            )
    return book, events


def step(
    book: BookState, batch: list[Order]
) -> tuple[BookState, list[EngineEvent]]:
    """Fold submit over a timestamp-sorted batch."""
    events: list[EngineEvent] = []
    for o in batch:
        _, ev = submit(book, o)
        events.extend(ev)
    return book, events


def top_levels(book: BookState, l: int) -> Snapshot:
    """Best l levels per side as a Snapshot in real currency units.

    Raises DepthError (carrying the available depth) when a side is thinner
    than l; the sampling pipeline owns the padding policy.
    """
    if not book.bids or not book.asks:
        raise EmptySideError("cannot snapshot a one-sided book")
    if len(book.bids) < l:
        raise DepthError(BID, len(book.bids), l)
    if len(book.asks) < l:
        raise DepthError(ASK, len(book.asks), l)
    bid_prices = sorted(book.bids, reverse=True)[:l]
    ask_prices = sorted(book.asks)[:l]
    lv = np.empty((l, 4), dtype=float)
    for i in range(l):
        lv[i, 0] = bid_prices[i] * book.tick_size
        lv[i, 1] = book.bids[bid_prices[i]].total_volume
        lv[i, 2] = ask_prices[i] * book.tick_size
        lv[i, 3] = book.asks[ask_prices[i]].total_volume
    return Snapshot(levels=lv, time=book.clock or 0)
