"""Regular-grid snapshot sampling over the continuous-auction sessions.

The exchange day is sampled on a 3-second grid restricted to the morning
[09:30, 11:30) and afternoon [13:00, 14:57) continuous sessions, which gives
(120 + 117) minutes * 20 samples/minute = 4740 snapshots per complete day.
Each grid point takes the latest book state at or before that instant, so
quiet periods are forward-filled by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .book import (
    ASK,
    BID,
    DEFAULT_LEVELS,
    BookState,
    DepthError,
    EmptySideError,
    Snapshot,
    flatten,
    unflatten,
)
from .engine import submit, top_levels

NS_PER_SEC = 1_000_000_000


def hms(h: int, m: int, s: int = 0) -> int:
    """Exchange-local time of day as integer nanoseconds."""
    return (h * 3600 + m * 60 + s) * NS_PER_SEC


class SamplingError(Exception):
    pass


@dataclass(frozen=True)
class SessionCalendar:
    """Continuous-auction intervals (half-open, ns of day) and sample period."""

    intervals: tuple = ((hms(9, 30), hms(11, 30)), (hms(13, 0), hms(14, 57)))
    period: int = 3 * NS_PER_SEC

    def __post_init__(self):
        prev_end = -1
        for start, end in self.intervals:
            if start <= prev_end:
                raise SamplingError("intervals must be disjoint and ordered")
            if (end - start) % self.period != 0:
                raise SamplingError("period must divide each interval length")
            prev_end = end

    def contains(self, t: int) -> bool:
        return any(start <= t < end for start, end in self.intervals)

    def grid(self) -> np.ndarray:
        """All sampling instants, one per period, session-restricted."""
        parts = [
            np.arange(start, end, self.period, dtype=np.int64)
            for start, end in self.intervals
        ]
        return np.concatenate(parts)

    @property
    def points_per_day(self) -> int:
        return sum((end - start) // self.period for start, end in self.intervals)


@dataclass
class DaySeries:
    """One instrument-day of snapshots on the sampling grid.

    Rows of `data` are flattened snapshots in the canonical 40-column layout.
    """

    instrument: str
    day: int
    data: np.ndarray  # (N, 4*l) float64
    times: np.ndarray  # (N,) int64
    levels: int = DEFAULT_LEVELS

    def __len__(self) -> int:
        return self.data.shape[0]

    def snapshot(self, i: int) -> Snapshot:
        return unflatten(self.data[i], l=self.levels, time=int(self.times[i]))

    @classmethod
    def from_snapshots(cls, instrument, day, snaps, levels=DEFAULT_LEVELS):
        data = np.stack([flatten(s) for s in snaps])
        times = np.array([s.time for s in snaps], dtype=np.int64)
        return cls(instrument, day, data, times, levels)

    def mid_prices(self) -> np.ndarray:
        return (self.data[:, 0] + self.data[:, 2 * self.levels]) / 2.0


def snapshot_padded(book: BookState, l: int = DEFAULT_LEVELS) -> Snapshot:
    """top_levels with thin sides padded one tick past the worst level, volume 1.

    Keeps every exported snapshot strictly positive and strictly monotone even
    when a side momentarily holds fewer than l levels.
    """
    try:
        return top_levels(book, l)
    except (DepthError, EmptySideError):
        pass
    bid_prices = sorted(book.bids, reverse=True)[:l]
    ask_prices = sorted(book.asks)[:l]
    if not bid_prices or not ask_prices:
        raise SamplingError("cannot pad a one-sided book")
    lv = np.empty((l, 4), dtype=float)
    for i in range(l):
        if i < len(bid_prices):
            bp, bv = bid_prices[i], book.bids[bid_prices[i]].total_volume
        else:
            bp, bv = bp - 1, 1  # one tick below the previous bid row
        if i < len(ask_prices):
            ap, av = ask_prices[i], book.asks[ask_prices[i]].total_volume
        else:
            ap, av = ap + 1, 1
        lv[i] = (bp * book.tick_size, bv, ap * book.tick_size, av)
    if lv[:, 0].min() <= 0:
        raise SamplingError("bid padding reached non-positive prices")
    return Snapshot(levels=lv, time=book.clock or 0)


def sample(
    book: BookState,
    orders,
    calendar: SessionCalendar = SessionCalendar(),
    l: int = DEFAULT_LEVELS,
    instrument: str = "",
    day: int = 0,
    pad: bool = True,
):
    """Replay orders through the engine, snapshotting at every grid point.

    Each grid point reflects the latest applied state at or before it. The
    book must be populated (e.g. by pre-open seed orders) before the first
    grid point. Returns (DaySeries, engine events).
    """
    grid = calendar.grid()
    events = []
    snaps = []
    it = iter(orders)
    pending = next(it, None)
    take = snapshot_padded if pad else top_levels
    for t in grid:
        while pending is not None and pending.timestamp <= t:
            _, ev = submit(book, pending)
            events.extend(ev)
            pending = next(it, None)
        if not book.bids or not book.asks:
            raise SamplingError(f"no book state at grid point {t}")
        snap = take(book, l)
        snaps.append(Snapshot(levels=snap.levels, time=int(t)))
    while pending is not None:
        _, ev = submit(book, pending)
        events.extend(ev)
        pending = next(it, None)
    series = DaySeries.from_snapshots(instrument, day, snaps, levels=l)
    return series, events


def forward_fill(
    snaps: list, instrument: str = "", day: int = 0, l: int = DEFAULT_LEVELS
) -> DaySeries:
    """Fill None gaps in a grid-aligned snapshot list with the last value."""
    if not snaps or snaps[0] is None:
        raise SamplingError("leading gap: first grid point has no snapshot")
    filled = []
    last = None
    for s in snaps:
        last = s if s is not None else last
        filled.append(last)
    return DaySeries.from_snapshots(instrument, day, filled, levels=l)


def filter_auction(snaps: list, calendar: SessionCalendar = SessionCalendar()):
    """Keep only snapshots whose times fall inside the trading sessions."""
    return [s for s in snaps if calendar.contains(s.time)]
