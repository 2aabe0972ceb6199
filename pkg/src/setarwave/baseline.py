"""Conditional least squares with an AIC grid search over delay and thresholds."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .detector import DetectionReport
from .setar import SeriesSample

__all__ = [
    "BaselineError",
    "GridFit",
    "GridThreshold",
    "cls_fit",
    "grid_search",
    "quantile_grid",
    "aic_value",
    "baseline_report",
]


class BaselineError(ValueError):
    pass


def aic_value(rss: float, n_eff: int, n_params: int) -> float:
    """``n_eff * ln(rss / n_eff) + 2 * n_params``; ``-inf`` for a perfect fit."""
    if rss < 0:
        raise BaselineError("rss must be nonnegative")
    if rss == 0:
        return -math.inf
    return n_eff * math.log(rss / n_eff) + 2 * n_params


@dataclass(frozen=True)
class GridFit:
    d: int
    thresholds: tuple[float, ...]
    orders: tuple[int, ...]
    coefficients: tuple[tuple[float, ...], ...]
    rss: float
    n_eff: int
    aic: float

    @property
    def n_params(self) -> int:
        return sum(p + 1 for p in self.orders) + len(self.thresholds)


def _values(series) -> np.ndarray:
    return series.values if isinstance(series, SeriesSample) else np.asarray(series, dtype=float)


def cls_fit(series, d: int, thresholds, orders, start: int | None = None) -> GridFit:
    """Per-regime ordinary least squares, regimes split by ``x_{t-d}``.

    Observations ``t = start .. n-1`` enter, with ``start`` defaulting to
    ``max(p, d)``.  Regime ``l`` is ``x_{t-d}`` in ``(lambda_{l-1}, lambda_l]``.
    ``coefficients[l]`` is ``(intercept, b_1, ..., b_{p_l})``.
    """
    x = _values(series)
    thresholds = tuple(float(v) for v in thresholds)
    orders = tuple(int(p) for p in orders)
    if len(orders) != len(thresholds) + 1:
        raise BaselineError(f"{len(thresholds)} thresholds need {len(thresholds) + 1} orders, got {len(orders)}")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise BaselineError("thresholds must be strictly increasing")
    if d < 1 or any(p < 0 for p in orders):
        raise BaselineError("need d >= 1 and nonnegative orders")
    p = max(orders)
    start = max(p, d) if start is None else start
    if start < max(p, d):
        raise BaselineError(f"start must be at least max(p, d) = {max(p, d)}")
    t = np.arange(start, x.size)
    regime = np.searchsorted(np.asarray(thresholds), x[t - d], side="left")
    coefs, rss = [], 0.0
    for l, p_l in enumerate(orders):
        rows = t[regime == l]
        if rows.size < p_l + 2:
            raise BaselineError(f"regime {l + 1} has {rows.size} observations, needs at least {p_l + 2}")
        X = np.column_stack([np.ones(rows.size)] + [x[rows - m] for m in range(1, p_l + 1)])
        y = x[rows]
        beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < X.shape[1]:
            raise BaselineError(f"regime {l + 1}: singular normal equations")
        resid = y - X @ beta
        rss += float(resid @ resid)
        coefs.append(tuple(float(b) for b in beta))
    n_eff = int(t.size)
    params = sum(q + 1 for q in orders) + len(thresholds)
    return GridFit(d, thresholds, orders, tuple(coefs), rss, n_eff, aic_value(rss, n_eff, params))


def quantile_grid(series, lo: float = 0.10, hi: float = 0.90, step: float = 0.05) -> np.ndarray:
    """Sample quantiles at ``lo, lo + step, ..., hi``."""
    count = int(round((hi - lo) / step)) + 1
    probs = lo + step * np.arange(count)
    return np.unique(np.quantile(_values(series), probs))


def grid_search(series, d_candidates, lambda_grid, orders, r: int = 1) -> GridFit:
    """Minimum-AIC fit over ``d_candidates`` and increasing ``r``-tuples from ``lambda_grid``.

    ``orders`` is one order shared by every regime or a sequence of ``r + 1``.
    Every candidate uses the same effective sample so AIC values compare.
    Ties go to the smaller ``d`` and then the lexicographically smaller
    threshold tuple.
    """
    d_candidates = sorted(set(int(d) for d in d_candidates))
    grid = sorted(set(float(v) for v in lambda_grid))
    if not d_candidates or (r > 0 and len(grid) < r):
        raise BaselineError("empty candidate set")
    orders = (int(orders),) * (r + 1) if np.ndim(orders) == 0 else tuple(int(p) for p in orders)
    start = max(max(orders), max(d_candidates))
    best, errors = None, []
    for d in d_candidates:
        for lam in itertools.combinations(grid, r):
            try:
                fit = cls_fit(series, d, lam, orders, start=start)
            except BaselineError as exc:
                errors.append(str(exc))
                continue
            if best is None or (fit.aic, fit.d, fit.thresholds) < (best.aic, best.d, best.thresholds):
                best = fit
    if best is None:
        raise BaselineError(f"all candidate fits failed; first error: {errors[0] if errors else 'none'}")
    return best


@dataclass(frozen=True)
class GridThreshold:
    lambda_hat: float


def baseline_report(fit: GridFit) -> DetectionReport:
    return DetectionReport(
        method="grid-aic",
        d_hat=fit.d,
        contrast=None,
        thresholds=tuple(GridThreshold(v) for v in fit.thresholds),
        extra={
            "aic": fit.aic if math.isfinite(fit.aic) else None,
            "rss": fit.rss,
            "n_eff": fit.n_eff,
            "orders": list(fit.orders),
            "coefficients": [list(c) for c in fit.coefficients],
        },
    )
