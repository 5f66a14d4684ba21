"""Normalization, chronological splitting, windowing, labeling and masking.

Two z-score schemes are supported. Feature-wise standardizes each of the 40
columns independently and is known to break price-level ordering; the global
scheme pools all 20 price columns into one (mu, sigma) pair and all 20 volume
columns into another, which preserves within-row ordering of prices and of
volumes (a shared strictly increasing affine map).

Trend labels are always computed on raw, unnormalized mid-prices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .book import DEFAULT_LEVELS, price_cols, volume_cols

FEATURE_WISE = "feature-wise"
GLOBAL = "global"

SIGMA_FLOOR = 1e-8


class PreprocessError(Exception):
    pass


@dataclass
class NormStats:
    """Fitted normalization parameters plus the scope they came from."""

    scheme: str
    mu: np.ndarray  # feature-wise: (40,); global: [mu_price, mu_volume]
    sigma: np.ndarray  # same shape; floored at SIGMA_FLOOR
    scope: str = "train"
    levels: int = DEFAULT_LEVELS

    def column_mu_sigma(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-column (mu, sigma) vectors regardless of scheme."""
        n = 4 * self.levels
        if self.scheme == FEATURE_WISE:
            return self.mu, self.sigma
        mu = np.empty(n)
        sigma = np.empty(n)
        pc, vc = price_cols(self.levels), volume_cols(self.levels)
        mu[pc], sigma[pc] = self.mu[0], self.sigma[0]
        mu[vc], sigma[vc] = self.mu[1], self.sigma[1]
        return mu, sigma


@dataclass(frozen=True)
class LabelConfig:
    """Trend-label parameters: lookahead in snapshots, relative threshold."""

    horizon: int = 5
    delta: float = 0.001

    def __post_init__(self):
        if self.horizon < 1 or self.delta < 0:
            raise PreprocessError("need horizon >= 1 and delta >= 0")


@dataclass
class Window:
    """One T x (4*l) slice of a series, optionally labeled and/or masked."""

    data: np.ndarray  # (T, 4*l), may be a view into the parent series
    label: int | None = None
    mask: np.ndarray | None = None  # sorted masked time-step indices
    origin: tuple = ("", 0, 0)  # (instrument, day, start index)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    def masked_input(self) -> np.ndarray:
        """Copy of data with masked rows zeroed, for model input."""
        out = self.data.copy()
        if self.mask is not None:
            out[self.mask] = 0.0
        return out


def _fit(values: np.ndarray) -> tuple[float, float]:
    mu = float(np.mean(values))
    sigma = max(float(np.std(values)), SIGMA_FLOOR)  # population convention
    return mu, sigma


def fit_feature_stats(
    data: np.ndarray, scope: str = "train", levels: int = DEFAULT_LEVELS
) -> NormStats:
    """Per-column mean/std over the fit scope."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise PreprocessError("cannot fit stats on empty data")
    mu = data.mean(axis=0)
    sigma = np.maximum(data.std(axis=0), SIGMA_FLOOR)
    return NormStats(FEATURE_WISE, mu, sigma, scope=scope, levels=levels)


def fit_group_stats(
    data: np.ndarray, scope: str = "train", levels: int = DEFAULT_LEVELS
) -> NormStats:
    """Pooled (mu, sigma) over all price columns and over all volume columns."""
    data = np.asarray(data, dtype=float)
    if data.size == 0:
        raise PreprocessError("cannot fit stats on empty data")
    mu_p, sig_p = _fit(data[:, price_cols(levels)])
    mu_v, sig_v = _fit(data[:, volume_cols(levels)])
    return NormStats(
        GLOBAL, np.array([mu_p, mu_v]), np.array([sig_p, sig_v]),
        scope=scope, levels=levels,
    )


def normalize(data: np.ndarray, stats: NormStats) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    mu, sigma = stats.column_mu_sigma()
    if data.shape[-1] != mu.shape[0]:
        raise PreprocessError(
            f"data has {data.shape[-1]} columns, stats expect {mu.shape[0]}"
        )
    return (data - mu) / sigma


def denormalize(data: np.ndarray, stats: NormStats) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    mu, sigma = stats.column_mu_sigma()
    if data.shape[-1] != mu.shape[0]:
        raise PreprocessError(
            f"data has {data.shape[-1]} columns, stats expect {mu.shape[0]}"
        )
    return data * sigma + mu


def split_train_test(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Chronological 4:1 split: first ceil(0.8 N) rows train, rest test."""
    n = data.shape[0]
    if n < 5:
        raise PreprocessError(f"need at least 5 snapshots, got {n}")
    cut = math.ceil(0.8 * n)
    return data[:cut], data[cut:]


def make_windows(
    series: np.ndarray,
    T: int = 100,
    step: int = 1,
    origin: tuple = ("", 0, 0),
) -> list[Window]:
    """Sliding windows of T rows; starts 0, step, ..., up to N-T."""
    series = np.asarray(series, dtype=float)
    n = series.shape[0]
    if n < T:
        return []
    instrument, day, base = origin
    return [
        Window(data=series[i : i + T], origin=(instrument, day, base + i))
        for i in range(0, n - T + 1, step)
    ]


def label_trend(mids: np.ndarray, t: int, cfg: LabelConfig) -> int:
    """Trend of the mean mid over (t, t+horizon] vs mid at t, threshold delta."""
    if t + cfg.horizon >= len(mids):
        raise PreprocessError(
            f"index {t} needs {cfg.horizon} lookahead in a series of {len(mids)}"
        )
    m_t = mids[t]
    m_bar = float(np.mean(mids[t + 1 : t + cfg.horizon + 1]))
    if m_bar > (1 + cfg.delta) * m_t:
        return 1
    if m_bar < (1 - cfg.delta) * m_t:
        return -1
    return 0


def balance_classes(windows: list[Window], seed: int) -> list[Window]:
    """Down-sample each label class to the minority count, without replacement."""
    by_label: dict[int, list[int]] = {}
    for i, w in enumerate(windows):
        if w.label is None:
            raise PreprocessError(f"window {i} has no label")
        by_label.setdefault(w.label, []).append(i)
    for lbl in (-1, 0, 1):
        if lbl not in by_label:
            raise PreprocessError(f"class {lbl} has no samples")
    k = min(len(v) for v in by_label.values())
    rng = np.random.default_rng(seed)
    keep: list[int] = []
    for lbl in sorted(by_label):
        idx = np.array(by_label[lbl])
        keep.extend(rng.choice(idx, size=k, replace=False).tolist())
    return [windows[i] for i in sorted(keep)]


def mask_for_imputation(w: Window, ratio: float = 0.2, seed: int = 0) -> Window:
    """Mask floor(ratio*T) distinct time steps, chosen uniformly per seed."""
    if not 0 < ratio < 1:
        raise PreprocessError(f"ratio must be in (0, 1), got {ratio}")
    k = int(ratio * w.T)
    rng = np.random.default_rng(seed)
    mask = np.sort(rng.choice(w.T, size=k, replace=False))
    return Window(data=w.data, label=w.label, mask=mask, origin=w.origin)
