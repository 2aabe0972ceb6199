"""Lag vectors, dominated neighborhoods and the empirical wavelet statistic.

Indexing is 0-based: the lag vector paired with response ``x_l`` is built
from ``x_{l-1}, ..., x_{l-p}`` (plus ``x_{l-i}`` for a candidate lag
``i > p``), and ``l`` runs over ``D .. n-1``.  Coordinates that carry no
sample are padded with the window's lower end ``a``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .setar import SeriesSample
from .wavelet import WaveletSpec, default_wavelet, is_interior, kernel_matrix

__all__ = [
    "EstimatorConfig",
    "EstimatorError",
    "GridParams",
    "LagVector",
    "LagIndex",
    "EmpiricalWaveletSurface",
    "resolve_window",
    "grid_params",
    "grid_size",
    "build_lag_vector",
    "neighborhood",
    "brute_force_neighborhood",
    "conditioning_bases",
    "assemble_point",
    "conditional_means",
    "wavelet_from_means",
    "empirical_wavelet",
    "surface",
    "write_surface_csv",
    "EMPTY_POLICIES",
]

EMPTY_POLICIES = ("drop-and-renormalize", "nearest-fallback")
SURFACE_SCHEMA = "# schema: setarwave-surface/1"


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    """Settings for the empirical wavelet.

    ``a``/``b`` default to the 5th/95th percentiles of the series.  ``delta``
    defaults to ``n^{-1/(D+2)}``.  ``N`` defaults to ``2**15`` grid points:
    the textbook ``floor(n^{1/(D+2)})`` is available with ``N_override=None``
    but is far too coarse for any scale at desk-sized ``n``.
    """

    D: int
    p: int
    a: float | None = None
    b: float | None = None
    j_star: int = 2
    j_n: int | None = None
    delta_override: float | None = None
    N_override: int | None = 2**15
    empty_policy: str = "drop-and-renormalize"
    min_count: int = 1
    populated_floor: float = 0.9
    interior_bases: bool = True
    full_grid: bool = False
    window_quantiles: tuple[float, float] = (0.05, 0.95)
    wavelet: WaveletSpec = field(default_factory=default_wavelet)

    def __post_init__(self):
        if not 1 <= self.p <= self.D:
            raise EstimatorError(f"need 1 <= p <= D, got p={self.p}, D={self.D}")
        if self.a is not None and self.b is not None and not self.a < self.b:
            raise EstimatorError(f"window needs a < b, got [{self.a}, {self.b}]")
        if self.j_star < 1:
            raise EstimatorError(f"j_star must be >= 1, got {self.j_star}")
        if self.j_n is not None and self.j_n < 1:
            raise EstimatorError(f"j_n must be >= 1, got {self.j_n}")
        if self.empty_policy not in EMPTY_POLICIES:
            raise EstimatorError(f"empty_policy must be one of {EMPTY_POLICIES}, got {self.empty_policy!r}")
        if self.min_count < 1:
            raise EstimatorError("min_count must be >= 1")
        if self.delta_override is not None and not self.delta_override >= 0:
            raise EstimatorError("delta_override must be nonnegative")

    @property
    def resolved(self) -> bool:
        return self.a is not None and self.b is not None

    def with_window(self, series: SeriesSample | np.ndarray) -> "EstimatorConfig":
        a, b = resolve_window(series, self)
        return replace(self, a=a, b=b)


def _values(series) -> np.ndarray:
    return series.values if isinstance(series, SeriesSample) else np.asarray(series, dtype=float)


def resolve_window(series, config: EstimatorConfig) -> tuple[float, float]:
    """Configured window, or the configured quantile range of the series."""
    x = _values(series)
    lo_q, hi_q = config.window_quantiles
    a = config.a if config.a is not None else float(np.quantile(x, lo_q))
    b = config.b if config.b is not None else float(np.quantile(x, hi_q))
    if not a < b:
        raise EstimatorError(f"degenerate window [{a}, {b}]; is the series constant?")
    return a, b


@dataclass(frozen=True)
class GridParams:
    delta: float
    N: int
    s: np.ndarray


def grid_size(n: int, config: EstimatorConfig) -> int:
    """Number of Riemann grid points ``N``."""
    if n < config.D + 2:
        raise EstimatorError(f"series of length {n} is shorter than D + 2 = {config.D + 2}; supply a longer series")
    if config.N_override is not None:
        N = int(config.N_override)
    else:
        N = int(np.floor(n ** (1.0 / (config.D + 2)) + 1e-9))
    if N < 2:
        raise EstimatorError(f"grid size N = {N} < 2: series of length {n} is too short for the window")
    return N


def grid_params(n: int, config: EstimatorConfig) -> GridParams:
    """Neighborhood radius, Riemann grid size and grid points ``s_1 .. s_N``."""
    N = grid_size(n, config)
    if not config.resolved:
        raise EstimatorError("window [a, b] is not resolved; call config.with_window(series) first")
    delta = config.delta_override if config.delta_override is not None else n ** (-1.0 / (config.D + 2))
    s = config.a + np.arange(1, N + 1) * (config.b - config.a) / N
    s.flags.writeable = False
    return GridParams(float(delta), N, s)


@dataclass(frozen=True)
class LagVector:
    coords: np.ndarray
    origin_index: int
    candidate_lag: int


def build_lag_vector(series, l: int, i: int, config: EstimatorConfig) -> LagVector:
    """Lag vector for response ``x_l`` and candidate lag ``i``."""
    x = _values(series)
    p, D = config.p, config.D
    if not 1 <= i <= D:
        raise IndexError(f"candidate lag i={i} outside 1..{D}")
    if l < max(p, i) or l >= x.size:
        raise IndexError(f"index l={l} needs max(p, i) <= l < {x.size}")
    if config.a is None:
        raise EstimatorError("window lower end a is not resolved")
    coords = np.full(D, float(config.a))
    coords[:p] = x[l - p : l][::-1]
    if i > p:
        coords[i - 1] = x[l - i]
    return LagVector(coords, l, i)


def _sqdist(X: np.ndarray, T) -> np.ndarray:
    """Squared distance accumulated left to right over coordinates.

    ``T`` entries may be scalars or per-row arrays; the fixed order makes
    every caller produce bit-identical values.
    """
    acc = np.zeros(X.shape[0])
    for c in range(X.shape[1]):
        diff = X[:, c] - T[c]
        acc = acc + diff * diff
    return acc


def _member(X: np.ndarray, T, delta: float) -> np.ndarray:
    dominated = np.ones(X.shape[0], dtype=bool)
    for c in range(X.shape[1]):
        dominated &= X[:, c] <= T[c]
    return dominated & (_sqdist(X, T) < delta * delta)


class LagIndex:
    """All lag vectors for one candidate lag, with a sorted projection on coordinate 1."""

    def __init__(self, values: np.ndarray, i: int, p: int, D: int, a: float):
        x = np.asarray(values, dtype=float)
        if x.size < D + 2:
            raise EstimatorError(f"series of length {x.size} is shorter than D + 2 = {D + 2}")
        self.lag = i
        self.l = np.arange(D, x.size)
        X = np.full((self.l.size, D), float(a))
        for c in range(p):
            X[:, c] = x[self.l - 1 - c]
        if i > p:
            X[:, i - 1] = x[self.l - i]
        self.X = X
        self.y = x[self.l]
        self.order = np.argsort(X[:, 0], kind="stable")
        self.sorted0 = X[self.order, 0]

    def candidates(self, upper0: float, radius: float) -> np.ndarray:
        """Rows whose first coordinate lies in a superset of ``(upper0 - radius, upper0]``."""
        lo = np.searchsorted(self.sorted0, upper0 - radius * (1 + 1e-9) - 1e-300, side="left")
        hi = np.searchsorted(self.sorted0, upper0, side="right")
        return np.sort(self.order[lo:hi])

    def query(self, T, delta: float) -> np.ndarray:
        rows = self.candidates(T[0], delta)
        hit = rows[_member(self.X[rows], T, delta)]
        return self.l[hit]

    def brute(self, T, delta: float) -> np.ndarray:
        return self.l[_member(self.X, T, delta)]


def _index(series, m: int, config: EstimatorConfig) -> LagIndex:
    if config.a is None:
        raise EstimatorError("window lower end a is not resolved")
    return LagIndex(_values(series), m, config.p, config.D, config.a)


def neighborhood(series, m: int, T, delta: float, config: EstimatorConfig) -> np.ndarray:
    """Sorted ``l`` with ``||X_l^m - T|| < delta`` and ``X_l^m <= T`` componentwise."""
    T = np.asarray(T, dtype=float)
    if T.shape != (config.D,):
        raise EstimatorError(f"conditioning point must have {config.D} coordinates")
    return _index(series, m, config).query(T, delta)


def brute_force_neighborhood(series, m: int, T, delta: float, config: EstimatorConfig) -> np.ndarray:
    """Reference O(n D) scan for :func:`neighborhood`."""
    T = np.asarray(T, dtype=float)
    return _index(series, m, config).brute(T, delta)


def _padded_positions(m: int, p: int, D: int) -> list[int]:
    """1-based coordinates forced to ``a`` in every lag vector for lag ``m``."""
    return [c for c in range(p + 1, D + 1) if c != m]


def assemble_point(base, m: int, s: float) -> np.ndarray:
    """``T^{m,s}``: insert ``s`` at 1-based position ``m`` of the ``D - 1`` base coordinates."""
    return np.insert(np.asarray(base, dtype=float), m - 1, s)


def conditioning_bases(m: int, config: EstimatorConfig, delta: float) -> np.ndarray:
    """Bases ``T_{j*}`` enumerated for lag ``m``, one row per base.

    Grid nodes are ``a + k (b - a) / 2^{j*}`` for ``k = 0 .. 2^{j*} - 1``.
    With ``full_grid`` every combination is returned.  Otherwise padded
    coordinates are kept only at nodes within ``delta`` of ``a`` (any other
    value empties every neighborhood), and with ``interior_bases`` the free
    coordinates skip the node at ``a``, whose dominated neighborhoods sit
    entirely below the window.
    """
    a, b, D = config.a, config.b, config.D
    nodes = a + np.arange(2**config.j_star) * (b - a) / 2**config.j_star
    if config.full_grid:
        return np.array(list(itertools.product(nodes, repeat=D - 1)), dtype=float).reshape(-1, D - 1)
    padded = set(_padded_positions(m, config.p, D))
    near_a = [t for t in nodes if (t - a) * (t - a) < delta * delta] or [a]
    free_nodes = list(nodes[1:]) if config.interior_bases and len(nodes) > 1 else list(nodes)
    choices = []
    for c in range(1, D + 1):
        if c == m:
            continue
        choices.append(near_a if c in padded else free_nodes)
    return _stack(itertools.product(*choices), D - 1)


def _stack(rows, width: int) -> np.ndarray:
    rows = list(rows)
    return np.array(rows, dtype=float).reshape(len(rows), width)


def _nearest_fill(index: LagIndex, T_base: np.ndarray, m: int, s: np.ndarray, delta: float, todo: np.ndarray):
    """Closest dominated response within ``2 delta`` for each grid point in ``todo``."""
    radius = 2 * delta
    T = T_base.copy()
    out = np.full(todo.size, np.nan)
    rows = np.arange(index.X.shape[0]) if m == 1 else index.candidates(T[0], radius)
    for pos, i in enumerate(todo):
        T[m - 1] = s[i]
        X = index.X[rows]
        ok = np.all(X <= T, axis=1)
        d2 = _sqdist(X, T)
        ok &= d2 < radius * radius
        if np.any(ok):
            cand = np.flatnonzero(ok)
            best = cand[np.argmin(d2[cand])]
            out[pos] = index.y[rows[best]]
    return out


def conditional_means(series, m: int, base, config: EstimatorConfig, grid: GridParams | None = None, method: str = "indexed", index: LagIndex | None = None):
    """Neighborhood averages of ``x_l`` at every ``T^{m, s_i}``.

    Returns ``(means, counts, populated)``; ``means`` is NaN where the grid
    point is not populated.  ``method="brute"`` resolves each neighborhood
    by a full scan and exists for cross-checking.
    """
    x = _values(series)
    grid = grid or grid_params(x.size, config)
    index = index or _index(x, m, config)
    s, delta, N = grid.s, grid.delta, grid.N
    T = assemble_point(base, m, np.nan)
    if method == "brute":
        counts = np.zeros(N, dtype=np.int64)
        sums = np.zeros(N)
        for i in range(N):
            T[m - 1] = s[i]
            hit = _member(index.X, T, delta)
            counts[i] = hit.sum()
            sums[i] = index.y[hit].sum()
    elif method == "indexed":
        counts, sums = _sweep(index, T, m, s, delta)
    else:
        raise ValueError(f"unknown method {method!r}")
    populated = counts >= config.min_count
    means = np.full(N, np.nan)
    means[populated] = sums[populated] / counts[populated]
    if config.empty_policy == "nearest-fallback":
        todo = np.flatnonzero(counts == 0)
        if todo.size:
            fill = _nearest_fill(index, T, m, s, delta, todo)
            got = ~np.isnan(fill)
            means[todo[got]] = fill[got]
            populated[todo[got]] = True
    return means, counts, populated


def _sweep(index: LagIndex, T: np.ndarray, m: int, s: np.ndarray, delta: float):
    """Counts and response sums for every grid point in one pass.

    For a fixed row the membership test is monotone in ``s`` once
    ``s >= x_m``, so each row contributes to one contiguous run of grid
    points.  The run's end is found by bisection on the exact membership
    test used by the brute-force scan.
    """
    N = s.size
    D = index.X.shape[1]
    others = [c for c in range(D) if c != m - 1]
    rows = np.arange(index.X.shape[0]) if m == 1 else index.candidates(T[0], delta)
    X = index.X[rows]
    keep = np.ones(rows.size, dtype=bool)
    for c in others:
        keep &= X[:, c] <= T[c]
    T0 = T.copy()
    T0[m - 1] = 0.0
    X0 = X.copy()
    X0[:, m - 1] = 0.0
    keep &= _sqdist(X0, T0) < delta * delta
    rows, X = rows[keep], X[keep]
    xm = X[:, m - 1]
    lo = np.searchsorted(s, xm, side="left")
    left = lo.copy()
    right = np.full(lo.size, N)
    Tcols = list(T)
    d2 = delta * delta
    while True:
        active = left < right
        if not np.any(active):
            break
        mid = (left + right) // 2
        Tcols[m - 1] = s[np.minimum(mid, N - 1)]
        inside = _sqdist(X, Tcols) < d2
        move = active & inside
        left = np.where(move, mid + 1, left)
        right = np.where(active & ~inside, mid, right)
    hi = left
    y = index.y[rows]
    counts = np.cumsum(np.bincount(lo, minlength=N + 1) - np.bincount(hi, minlength=N + 1))[:N]
    sums = np.cumsum(np.bincount(lo, weights=y, minlength=N + 1) - np.bincount(hi, weights=y, minlength=N + 1))[:N]
    return counts.astype(np.int64), sums


def wavelet_from_means(means: np.ndarray, populated: np.ndarray, K: np.ndarray, a: float, b: float):
    """Empirical wavelet for every translation from one profile of averages.

    ``W_k = (b - a) / N_k * sum_{populated i} psi^per_{j,k}(s_i) mean_i`` with
    ``N_k = N * (populated share of the grid points where psi_{j,k} != 0)``,
    so ``N_k = N`` when nothing is missing.  Returns ``(W, fraction)``;
    ``W`` is NaN (absent) when no point under the kernel is populated and
    exactly 0 when the kernel vanishes on the whole grid.
    """
    N = K.shape[1]
    pop = np.asarray(populated, dtype=bool)
    f = np.where(pop, means, 0.0)
    nz = K != 0
    nz_count = nz.sum(axis=1)
    pop_nz = nz[:, pop].sum(axis=1)
    overall = pop.mean()
    frac = np.where(nz_count > 0, pop_nz / np.maximum(nz_count, 1), overall)
    num = K @ f
    with np.errstate(divide="ignore", invalid="ignore"):
        W = (b - a) * num / (N * frac)
    W = np.where(nz_count == 0, 0.0, W)
    W = np.where((nz_count > 0) & (pop_nz == 0), np.nan, W)
    return W, frac


def empirical_wavelet(series, m: int, j: int, k: int, base, config: EstimatorConfig) -> dict:
    """``W^m_{j,k}(T)`` for a single base; ``W`` is None when absent."""
    x = _values(series)
    config = config if config.resolved else config.with_window(x)
    grid = grid_params(x.size, config)
    if not 0 <= k < 2**j:
        raise EstimatorError(f"translation k={k} outside 0..{2**j - 1}")
    means, _, populated = conditional_means(x, m, base, config, grid)
    K = kernel_matrix(config.wavelet, config.a, config.b, j, grid.N)[k : k + 1]
    W, frac = wavelet_from_means(means, populated, K, config.a, config.b)
    w = float(W[0])
    return {"W": None if np.isnan(w) else w, "populated_fraction": float(frac[0])}


@dataclass(frozen=True)
class EmpiricalWaveletSurface:
    """``W^m_{j,k}`` over all translations ``k`` (rows) and bases (columns)."""

    m: int
    j: int
    a: float
    b: float
    delta: float
    N: int
    bases: np.ndarray
    W: np.ndarray
    populated_fraction: np.ndarray
    interior: np.ndarray
    low_confidence: np.ndarray

    @property
    def absent(self) -> np.ndarray:
        return np.isnan(self.W)

    @property
    def locations(self) -> np.ndarray:
        return self.a + np.arange(2**self.j) * (self.b - self.a) / 2**self.j

    def eligible(self, interior_only: bool = True, allow_low_confidence: bool = False) -> np.ndarray:
        ok = ~self.absent
        if not allow_low_confidence:
            ok &= ~self.low_confidence
        if interior_only:
            ok &= self.interior[:, None]
        return ok

    def profile(self, interior_only: bool = True, allow_low_confidence: bool = False) -> np.ndarray:
        """``max`` over bases of ``|W|`` per translation; NaN where nothing is eligible."""
        ok = self.eligible(interior_only, allow_low_confidence)
        absW = np.where(ok, np.abs(np.nan_to_num(self.W)), -np.inf)
        prof = absW.max(axis=1) if absW.shape[1] else np.full(absW.shape[0], -np.inf)
        return np.where(np.isfinite(prof), prof, np.nan)


def surface(series, m: int, config: EstimatorConfig, method: str = "indexed") -> EmpiricalWaveletSurface:
    """Evaluate ``W^m_{j_n,k}`` for every ``k`` in ``0 .. 2^{j_n} - 1`` and every enumerated base."""
    x = _values(series)
    if x.size < config.D + 2:
        raise EstimatorError(f"series of length {x.size} is shorter than D + 2 = {config.D + 2}")
    if not 1 <= m <= config.D:
        raise EstimatorError(f"lag m={m} outside 1..{config.D}")
    if config.j_n is None:
        raise EstimatorError("detection scale j_n is not set; use detector.choose_scale")
    config = config if config.resolved else config.with_window(x)
    grid = grid_params(x.size, config)
    j = config.j_n
    K = kernel_matrix(config.wavelet, config.a, config.b, j, grid.N)
    bases = conditioning_bases(m, config, grid.delta)
    index = _index(x, m, config)
    W = np.full((2**j, len(bases)), np.nan)
    frac = np.zeros((2**j, len(bases)))
    for col, base in enumerate(bases):
        means, _, populated = conditional_means(x, m, base, config, grid, method=method, index=index)
        W[:, col], frac[:, col] = wavelet_from_means(means, populated, K, config.a, config.b)
    if np.all(np.isnan(W)):
        raise EstimatorError(f"window [{config.a:.6g}, {config.b:.6g}] does not intersect the data's range for lag {m}")
    interior = np.array([is_interior(j, k, config.wavelet.A) for k in range(2**j)])
    return EmpiricalWaveletSurface(
        m=m,
        j=j,
        a=config.a,
        b=config.b,
        delta=grid.delta,
        N=grid.N,
        bases=bases,
        W=W,
        populated_fraction=frac,
        interior=interior,
        low_confidence=frac < config.populated_floor,
    )


def write_surface_csv(surfaces, path) -> None:
    """Write ``m,j,k,location,base_id,W,populated_fraction`` rows plus a ``.bases.csv`` sidecar."""
    path = Path(path)
    rows = [SURFACE_SCHEMA, "m,j,k,location,base_id,W,populated_fraction"]
    side = [SURFACE_SCHEMA.replace("surface", "surface-bases")]
    D1 = max((srf.bases.shape[1] for srf in surfaces), default=0)
    side.append(",".join(["m", "base_id"] + [f"t{c}" for c in range(1, D1 + 1)]))
    for srf in surfaces:
        locs = srf.locations
        for base_id, base in enumerate(srf.bases):
            side.append(",".join([str(srf.m), str(base_id)] + [f"{v:.17g}" for v in base]))
        for k in range(2**srf.j):
            for base_id in range(len(srf.bases)):
                w = srf.W[k, base_id]
                wtxt = "" if np.isnan(w) else f"{w:.17g}"
                rows.append(f"{srf.m},{srf.j},{k},{locs[k]:.17g},{base_id},{wtxt},{srf.populated_fraction[k, base_id]:.17g}")
    path.write_text("\n".join(rows) + "\n")
    path.with_name(path.name + ".bases.csv").write_text("\n".join(side) + "\n")
