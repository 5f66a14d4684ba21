"""Evaluation metrics and training losses for T x 40 snapshot windows.

The composite loss is alpha*MSE + (1-alpha)*wMSE + lambda*L_reg. Note the
weighted MSE sums over time without dividing by T (so it is not on the same
scale as MSE), and L_reg is a hinge penalty on adjacent-price inversions
across the merged bid/ask ladder, averaged over time steps. Gradients are
exact; the hinge subgradient at zero is taken as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .book import DEFAULT_LEVELS, ladder_cols, price_cols, volume_cols


class MetricError(Exception):
    pass


def _check(x: np.ndarray, xh: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    xh = np.asarray(xh, dtype=float)
    if x.shape != xh.shape or x.ndim != 2:
        raise MetricError(f"shape mismatch: {x.shape} vs {xh.shape}")
    return x, xh


@dataclass
class WeightProfile:
    """Per-column importance weights; default decays as 1/level."""

    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        if np.any(self.w < 0) or self.w.sum() <= 0:
            raise MetricError("weights must be non-negative with positive sum")

    @property
    def W(self) -> float:
        return float(self.w.sum())

    @classmethod
    def inverse_level(cls, levels: int = DEFAULT_LEVELS) -> "WeightProfile":
        per_field = 1.0 / np.arange(1, levels + 1)
        return cls(w=np.tile(per_field, 4))

    @classmethod
    def uniform(cls, n: int = 40) -> "WeightProfile":
        return cls(w=np.ones(n))


@dataclass
class LossConfig:
    alpha: float = 0.5
    lam: float = 1.0
    weights: WeightProfile = field(
        default_factory=WeightProfile.inverse_level
    )

    def __post_init__(self):
        if not 0 <= self.alpha <= 1 or self.lam < 0:
            raise MetricError("need 0 <= alpha <= 1 and lam >= 0")


def mse(x: np.ndarray, xh: np.ndarray) -> float:
    x, xh = _check(x, xh)
    return float(np.mean((x - xh) ** 2))


def mae(x: np.ndarray, xh: np.ndarray) -> float:
    x, xh = _check(x, xh)
    return float(np.mean(np.abs(x - xh)))


def wmse(x: np.ndarray, xh: np.ndarray, p: WeightProfile) -> float:
    """(1/W) sum_j w_j sum_i e_ij^2; the time sum is not divided by T."""
    x, xh = _check(x, xh)
    col_sq = ((x - xh) ** 2).sum(axis=0)
    return float(np.dot(p.w, col_sq) / p.W)


def price_volume_losses(
    x: np.ndarray, xh: np.ndarray, levels: int = DEFAULT_LEVELS
) -> tuple[float, float]:
    """Mean squared error over the 20 price and 20 volume columns separately."""
    x, xh = _check(x, xh)
    sq = (x - xh) ** 2
    return (
        float(np.mean(sq[:, price_cols(levels)])),
        float(np.mean(sq[:, volume_cols(levels)])),
    )


def l_reg(xh: np.ndarray, levels: int = DEFAULT_LEVELS) -> float:
    """Hinge penalty on adjacent inversions of the expected-ascending ladder.

    Per time step the 2*levels prices are taken in the order b_p[l..1],
    a_p[1..l]; each adjacent pair contributes max(0, prev - next) / (2l - 1);
    the result is averaged over time steps.
    """
    xh = np.asarray(xh, dtype=float)
    ladder = xh[:, ladder_cols(levels)]
    gaps = ladder[:, :-1] - ladder[:, 1:]
    return float(np.mean(np.maximum(gaps, 0.0).sum(axis=1) / (2 * levels - 1)))


def l_reg_gradient(xh: np.ndarray, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    xh = np.asarray(xh, dtype=float)
    T = xh.shape[0]
    cols = ladder_cols(levels)
    ladder = xh[:, cols]
    active = (ladder[:, :-1] - ladder[:, 1:]) > 0  # subgradient at 0 is 0
    g_ladder = np.zeros_like(ladder)
    scale = 1.0 / ((2 * levels - 1) * T)
    g_ladder[:, :-1] += active * scale
    g_ladder[:, 1:] -= active * scale
    grad = np.zeros_like(xh)
    grad[:, cols] = g_ladder
    return grad


def l_all(x: np.ndarray, xh: np.ndarray, cfg: LossConfig,
          levels: int = DEFAULT_LEVELS) -> float:
    return (
        cfg.alpha * mse(x, xh)
        + (1 - cfg.alpha) * wmse(x, xh, cfg.weights)
        + cfg.lam * l_reg(xh, levels)
    )


def l_all_gradient(x: np.ndarray, xh: np.ndarray, cfg: LossConfig,
                   levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Exact d l_all / d xh, same shape as xh."""
    x, xh = _check(x, xh)
    e = xh - x
    g_mse = 2.0 * e / e.size
    g_wmse = 2.0 * e * (cfg.weights.w / cfg.weights.W)
    grad = cfg.alpha * g_mse + (1 - cfg.alpha) * g_wmse
    if cfg.lam != 0:
        grad = grad + cfg.lam * l_reg_gradient(xh, levels)
    return grad


def cross_entropy(logits: np.ndarray, label: int) -> float:
    """Softmax cross-entropy for a trend label in {-1, 0, +1} (class index
    label + 1), computed with max-subtraction for stability."""
    logits = np.asarray(logits, dtype=float)
    z = logits - logits.max()
    return float(np.log(np.exp(z).sum()) - z[label + 1])


def cross_entropy_gradient(logits: np.ndarray, label: int) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    z = np.exp(logits - logits.max())
    p = z / z.sum()
    p[label + 1] -= 1.0
    return p


def masked_mse(x: np.ndarray, xh: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over the masked time steps (all columns)."""
    x, xh = _check(x, xh)
    mask = np.asarray(mask, dtype=int)
    if mask.size == 0:
        raise MetricError("mask must be non-empty")
    return float(np.mean((x[mask] - xh[mask]) ** 2))


def masked_mse_gradient(x: np.ndarray, xh: np.ndarray,
                        mask: np.ndarray) -> np.ndarray:
    x, xh = _check(x, xh)
    mask = np.asarray(mask, dtype=int)
    if mask.size == 0:
        raise MetricError("mask must be non-empty")
    grad = np.zeros_like(xh)
    grad[mask] = 2.0 * (xh[mask] - x[mask]) / (mask.size * x.shape[1])
    return grad


@dataclass
class MetricsReport:
    """One evaluation record; serialized by the cli module."""

    mse: float
    mae: float
    wmse: float
    l_price: float
    l_volume: float
    l_reg: float
    l_all: float
    count: int
    ce: float | None = None
    masked_mse: float | None = None

    def as_items(self) -> list[tuple[str, object]]:
        items = [
            ("count", self.count),
            ("mse", self.mse),
            ("mae", self.mae),
            ("wmse", self.wmse),
            ("l_price", self.l_price),
            ("l_volume", self.l_volume),
            ("l_reg", self.l_reg),
            ("l_all", self.l_all),
        ]
        if self.ce is not None:
            items.append(("ce", self.ce))
        if self.masked_mse is not None:
            items.append(("masked_mse", self.masked_mse))
        return items


def report(
    xs, xhs, cfg: LossConfig, levels: int = DEFAULT_LEVELS,
    ces=None, masked=None,
) -> MetricsReport:
    """Aggregate metrics over matched lists of true/predicted windows."""
    n = len(xs)
    if n == 0:
        raise MetricError("empty evaluation set")
    acc = {k: 0.0 for k in ("mse", "mae", "wmse", "lp", "lv", "lr", "la")}
    for x, xh in zip(xs, xhs):
        acc["mse"] += mse(x, xh)
        acc["mae"] += mae(x, xh)
        acc["wmse"] += wmse(x, xh, cfg.weights)
        lp, lv = price_volume_losses(x, xh, levels)
        acc["lp"] += lp
        acc["lv"] += lv
        acc["lr"] += l_reg(xh, levels)
        acc["la"] += l_all(x, xh, cfg, levels)
    return MetricsReport(
        mse=acc["mse"] / n, mae=acc["mae"] / n, wmse=acc["wmse"] / n,
        l_price=acc["lp"] / n, l_volume=acc["lv"] / n, l_reg=acc["lr"] / n,
        l_all=acc["la"] / n, count=n,
        ce=None if ces is None else float(np.mean(ces)),
        masked_mse=None if masked is None else float(np.mean(masked)),
    )
