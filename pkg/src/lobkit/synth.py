"""Seeded synthetic order flow calibrated to published A-share statistics.

The generator walks a target mid-price on the tick grid (bounded, with mild
momentum so short-horizon trends are learnable), places limit orders around
it, occasionally crosses the spread, sends market orders, and cancels live
resting orders. It runs its own matching engine while generating, so every
emitted stream replays without invariant violations and cancels always
reference real live ids.

This is pipeline fuel, not a market model: depth shapes and offsets are
invented, only the headline price/volume statistics are calibrated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .book import ASK, BID, CANCEL, LIMIT, MARKET, BookState, Order
from .engine import submit
from .sampling import NS_PER_SEC, DaySeries, SessionCalendar, sample


@dataclass(frozen=True)
class FlowProfile:
    """Calibration targets and knobs for one instrument-like stream."""

    name: str
    mid_mean: float  # currency units
    mid_std: float  # daily mid-price standard deviation
    price_min: float
    price_max: float
    bid_volume_mean: int  # per-order volume scale
    ask_volume_mean: int
    arrival_rate: float = 0.3  # orders per second
    mix: tuple = (0.70, 0.10, 0.20)  # P(limit), P(market), P(cancel)
    offset_mean_ticks: float = 3.0  # limit placement distance from mid
    cross_prob: float = 0.15  # chance a limit is placed to cross
    momentum: float = 0.5  # AR(1) coefficient of mid-walk steps
    tick_size: float = 0.01
    seed_levels: int = 15
    order_volume_divisor: int = 20  # per-order volume = side mean / divisor

    def __post_init__(self):
        if abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("mix probabilities must sum to 1")
        if min(self.mid_std, self.bid_volume_mean, self.ask_volume_mean,
               self.arrival_rate) <= 0:
            raise ValueError("scale parameters must be positive")


# Headline 2019 statistics of the five reference tickers (mean/std/min/max
# price in RMB, mean resting volume per side). Per-order volumes are scaled
# down to desk size.
PROFILES = {
    "sz000001": FlowProfile("sz000001", 13.83, 1.91, 9.10, 18.29, 1864, 1964),
    "sz000002": FlowProfile("sz000002", 27.88, 1.72, 23.68, 33.70, 483, 542),
    "sz000858": FlowProfile("sz000858", 108.06, 26.52, 46.06, 154.00, 63, 62),
    "sz002415": FlowProfile("sz002415", 31.01, 3.16, 22.77, 38.61, 303, 248),
    "sz300147": FlowProfile("sz300147", 7.00, 0.83, 3.71, 10.10, 496, 305),
}


@dataclass
class FlowStream:
    """One trading day of orders, timestamp-sorted, replayable from scratch."""

    profile: str
    seed: int
    orders: list = field(default_factory=list)
    tick_size: float = 0.01

    def __len__(self):
        return len(self.orders)


def _seed_orders(p: FlowProfile, mid_ticks: int, next_id: int, t: int):
    """Pre-open book seeding: seed_levels resting levels per side, each
    holding the profile's side volume mean."""
    orders = []
    for i in range(1, p.seed_levels + 1):
        orders.append(Order(next_id, BID, LIMIT, t, price=mid_ticks - i,
                            volume=p.bid_volume_mean))
        next_id += 1
        orders.append(Order(next_id, ASK, LIMIT, t, price=mid_ticks + i,
                            volume=p.ask_volume_mean))
        next_id += 1
    return orders, next_id


def generate_day(
    p: FlowProfile,
    seed: int,
    calendar: SessionCalendar = SessionCalendar(),
) -> FlowStream:
    """One deterministic synthetic trading day of order flow."""
    rng = np.random.default_rng(seed)
    tick = p.tick_size
    lo, hi = round(p.price_min / tick), round(p.price_max / tick)
    mid = round(p.mid_mean / tick)
    # Per-3-second-step stddev in ticks, sized so a day's walk has roughly
    # the profile's daily stddev; momentum inflates variance, compensate.
    n_steps = calendar.points_per_day
    step_std = (p.mid_std / tick) / np.sqrt(n_steps) * (1 - p.momentum)

    book = BookState(tick_size=tick)
    next_id = 1
    t0 = calendar.intervals[0][0] - 60 * NS_PER_SEC
    stream, next_id = _seed_orders(p, mid, next_id, t0)
    for o in stream:
        submit(book, o)
    seed_ids = set(book.live)

    orders = list(stream)
    drift = 0.0
    target = float(mid)
    for t_grid in calendar.grid():
        drift = p.momentum * drift + rng.normal(0.0, step_std)
        target += drift
        if not lo + p.seed_levels < target < hi - p.seed_levels:
            target = float(np.clip(target, lo + p.seed_levels,
                                   hi - p.seed_levels))
            drift = 0.0
        n_orders = rng.poisson(p.arrival_rate * calendar.period / NS_PER_SEC)
        if n_orders == 0:
            continue
        times = np.sort(rng.integers(
            t_grid - calendar.period + 1, t_grid, size=n_orders, endpoint=True
        ))
        for ts in times:
            kind = rng.choice(3, p=p.mix)
            side = BID if rng.random() < 0.5 else ASK
            vol_mean = p.bid_volume_mean if side == BID else p.ask_volume_mean
            vol_mean = max(1.0, vol_mean / p.order_volume_divisor)
            volume = int(rng.geometric(1.0 / vol_mean))
            if kind == 2:
                cancellable = [
                    oid for oid in book.live if oid not in seed_ids
                ]
                if not cancellable:
                    continue
                target_id = cancellable[rng.integers(len(cancellable))]
                o = Order(next_id, side, CANCEL, int(ts), target_id=target_id)
            elif kind == 1:
                opp = book.asks if side == BID else book.bids
                if not opp:
                    continue
                o = Order(next_id, side, MARKET, int(ts), volume=volume)
            else:
                offset = int(rng.geometric(1.0 / p.offset_mean_ticks))
                if rng.random() < p.cross_prob:
                    offset = -offset  # place through the target mid
                price = (
                    round(target) - offset if side == BID
                    else round(target) + offset
                )
                price = int(np.clip(price, 1, hi + p.seed_levels))
                o = Order(next_id, side, LIMIT, int(ts), price=price,
                          volume=volume)
            next_id += 1
            submit(book, o)
            orders.append(o)
        # Liquidity maintenance: keep a ladder of seed_levels resting levels
        # on each side of the target mid so the book tracks the walk and
        # never goes one-sided. Refills that cross simply execute, which is
        # what pulls the book mid toward the target after a fast move.
        anchor = round(target)
        for i in range(1, p.seed_levels + 1):
            bid_px = anchor - i
            if bid_px >= 1 and bid_px not in book.bids:
                o = Order(next_id, BID, LIMIT, int(t_grid),
                          price=bid_px, volume=p.bid_volume_mean)
                next_id += 1
                submit(book, o)
                orders.append(o)
            ask_px = anchor + i
            if ask_px not in book.asks:
                o = Order(next_id, ASK, LIMIT, int(t_grid),
                          price=ask_px, volume=p.ask_volume_mean)
                next_id += 1
                submit(book, o)
                orders.append(o)
    return FlowStream(profile=p.name, seed=seed, orders=orders,
                      tick_size=tick)


@dataclass
class ConservationReport:
    """Volume accounting per side across one replayed stream."""

    submitted: dict
    executed: dict
    cancelled: dict
    resting: dict
    market_unfilled: dict
    cancel_misses: int

    def balanced(self) -> bool:
        return all(
            self.submitted[s]
            == self.executed[s] + self.cancelled[s] + self.resting[s]
            + self.market_unfilled[s]
            for s in (BID, ASK)
        )


def replay_check(
    stream: FlowStream,
    calendar: SessionCalendar = SessionCalendar(),
    l: int = 10,
    instrument: str = "",
    day: int = 0,
) -> tuple[DaySeries, ConservationReport]:
    """Replay a stream end to end, asserting book invariants and conservation.

    Raises on any snapshot invariant violation, identifying nothing subtler
    than the grid point (violations cannot occur by engine construction).
    """
    from .book import validate_snapshot

    book = BookState(tick_size=stream.tick_size)
    side_of = {o.id: o.side for o in stream.orders}
    # cancelled volume belongs to the target's side, not the cancel's
    cancel_target = {
        o.id: o.target_id for o in stream.orders if o.kind == CANCEL
    }
    series, events = sample(
        book, stream.orders, calendar, l=l, instrument=instrument, day=day
    )
    sub = {BID: 0, ASK: 0}
    exe = {BID: 0, ASK: 0}
    canc = {BID: 0, ASK: 0}
    unfilled = {BID: 0, ASK: 0}
    misses = 0
    for o in stream.orders:
        if o.kind in (LIMIT, MARKET):
            sub[o.side] += o.volume
    for ev in events:
        if ev.kind == "trade":
            tr = ev.trade
            exe[side_of[tr.taker_id]] += tr.volume
            exe[side_of[tr.maker_id]] += tr.volume
        elif ev.kind == "cancel_ok":
            canc[side_of[cancel_target[ev.order_id]]] += ev.volume
        elif ev.kind == "market_unfilled":
            unfilled[side_of[ev.order_id]] += ev.volume
        elif ev.kind == "cancel_miss":
            misses += 1
    rest = {BID: 0, ASK: 0}
    for lvl in book.bids.values():
        rest[BID] += lvl.total_volume
    for lvl in book.asks.values():
        rest[ASK] += lvl.total_volume
    report = ConservationReport(sub, exe, canc, rest, unfilled, misses)
    for i in range(len(series)):
        bad = validate_snapshot(series.snapshot(i))
        if bad:
            raise RuntimeError(
                f"invariant violation at grid index {i}: {bad[0]}"
            )
    return series, report
