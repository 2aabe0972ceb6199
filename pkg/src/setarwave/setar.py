"""SETAR models: regime logic, the noiseless skeleton, simulation and series I/O."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "NoiseSpec",
    "Regime",
    "SetarModel",
    "SeriesSample",
    "SimulationError",
    "StabilityReport",
    "regime_index",
    "skeleton_H",
    "simulate",
    "check_stability_heuristic",
    "write_series_csv",
    "read_series_csv",
    "SERIES_SCHEMA",
]

SERIES_SCHEMA = "# schema: setarwave-series/1"
NOISE_KINDS = ("uniform", "truncated-gaussian")


class SimulationError(RuntimeError):
    """The recursion produced a non-finite value."""


@dataclass(frozen=True)
class NoiseSpec:
    """Bounded, mean-zero regime noise.

    ``uniform`` draws from U[-bound, bound] and ignores ``scale``.
    ``truncated-gaussian`` draws N(0, scale^2) and resamples until the draw
    lies in [-bound, bound].
    """

    kind: str = "uniform"
    scale: float = 1.0
    bound: float = 1.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.bound) and self.bound > 0):
            raise ValueError(f"noise bound must be finite and positive, got {self.bound}")
        if not self.scale > 0:
            raise ValueError(f"noise scale must be positive, got {self.scale}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(-self.bound, self.bound, size)
        out = np.empty(0)
        while out.size < size:
            batch = rng.normal(0.0, self.scale, 2 * (size - out.size) + 16)
            out = np.concatenate([out, batch[np.abs(batch) <= self.bound]])
        return out[:size]


@dataclass(frozen=True)
class Regime:
    intercept: float
    coeffs: tuple[float, ...]
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def order(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class SetarModel:
    """SETAR(d, r, p_1, ..., p_{r+1}).

    Regime ``l`` (1-based) is active when ``x_{t-d}`` lies in
    ``(lambda_{l-1}, lambda_l]`` with ``lambda_0 = -inf`` and
    ``lambda_{r+1} = +inf``.  Coefficients are zero-padded to the common
    order ``p`` and stored in ``coef_matrix``.
    """

    regimes: tuple[Regime, ...]
    thresholds: tuple[float, ...]
    delay: int
    delay_bound: int
    coef_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(self.regimes))
        object.__setattr__(self, "thresholds", tuple(float(v) for v in self.thresholds))
        if len(self.regimes) != len(self.thresholds) + 1:
            raise ValueError(f"{len(self.thresholds)} thresholds need {len(self.thresholds) + 1} regimes, got {len(self.regimes)}")
        if any(not math.isfinite(v) for v in self.thresholds):
            raise ValueError("thresholds must be finite")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {self.thresholds}")
        if not 1 <= self.delay <= self.delay_bound:
            raise ValueError(f"need 1 <= d <= D, got d={self.delay}, D={self.delay_bound}")
        p = self.order
        mat = np.zeros((len(self.regimes), p))
        for l, reg in enumerate(self.regimes):
            mat[l, : reg.order] = reg.coeffs
        mat.flags.writeable = False
        object.__setattr__(self, "coef_matrix", mat)

    @property
    def r(self) -> int:
        return len(self.thresholds)

    @property
    def order(self) -> int:
        return max(reg.order for reg in self.regimes)

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([reg.intercept for reg in self.regimes])

    @property
    def noise_bound(self) -> float:
        return max(reg.noise.bound for reg in self.regimes)

    def to_dict(self) -> dict:
        return {
            "delay": self.delay,
            "delay_bound": self.delay_bound,
            "thresholds": list(self.thresholds),
            "regimes": [
                {
                    "intercept": reg.intercept,
                    "coeffs": list(reg.coeffs),
                    "noise": {"kind": reg.noise.kind, "scale": reg.noise.scale, "bound": reg.noise.bound},
                }
                for reg in self.regimes
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SetarModel":
        regimes = tuple(
            Regime(float(reg["intercept"]), tuple(reg["coeffs"]), NoiseSpec(**reg.get("noise", {})))
            for reg in data["regimes"]
        )
        return cls(regimes, tuple(data.get("thresholds", ())), int(data["delay"]), int(data["delay_bound"]))


@dataclass(frozen=True)
class SeriesSample:
    """An observed or simulated series ``x_0 .. x_{n-1}``."""

    values: np.ndarray
    seed: int | None = None
    burn_in: int = 0
    model: SetarModel | None = None

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("series values must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size


def regime_index(model: SetarModel, v: float) -> int:
    """1-based regime whose interval ``(lambda_{l-1}, lambda_l]`` contains ``v``."""
    return bisect.bisect_left(model.thresholds, v) + 1


def skeleton_H(model: SetarModel, lags: Sequence[float], v_d: float) -> float:
    """Noiseless conditional mean ``b_{l0} + sum_m b_{lm} lags_m`` of the active regime."""
    lags = np.asarray(lags, dtype=float)
    if lags.shape != (model.order,):
        raise ValueError(f"expected {model.order} lags, got {lags.shape}")
    l = regime_index(model, v_d) - 1
    return float(model.regimes[l].intercept + model.coef_matrix[l] @ lags)


def simulate(model: SetarModel, n: int, seed: int, burn_in: int = 500) -> SeriesSample:
    """Iterate the SETAR recursion and return the last ``n`` values.

    The first ``max(p, D)`` values are regime-1 noise.  Each regime draws
    from its own child stream of ``seed``; the k-th activation of a regime
    consumes that regime's k-th draw.

    Raises
    ------
    SimulationError
        When the path leaves the floating-point range (explosive model).
    """
    p, D, d = model.order, model.delay_bound, model.delay
    if n < D + 2:
        raise ValueError(f"n must be at least D + 2 = {D + 2}, got {n}")
    if burn_in < max(p, d):
        raise ValueError(f"burn_in must be at least max(p, d) = {max(p, d)}, got {burn_in}")
    total = burn_in + n
    start = max(p, D)
    children = np.random.SeedSequence(seed).spawn(model.r + 2)
    init = model.regimes[0].noise.draw(np.random.default_rng(children[0]), start)
    eps = [reg.noise.draw(np.random.default_rng(ch), total) for reg, ch in zip(model.regimes, children[1:])]
    for reg, buf in zip(model.regimes, eps):
        assert np.all(np.abs(buf) <= reg.noise.bound)

    x = [0.0] * total
    x[:start] = init.tolist()
    thresholds = list(model.thresholds)
    intercepts = model.intercepts.tolist()
    coefs = model.coef_matrix.tolist()
    used = [0] * len(model.regimes)
    for t in range(start, total):
        l = bisect.bisect_left(thresholds, x[t - d])
        assert 0 <= l <= model.r
        val = intercepts[l] + eps[l][used[l]]
        used[l] += 1
        for m, c in enumerate(coefs[l], start=1):
            val += c * x[t - m]
        if not math.isfinite(val) or abs(val) > 1e150:
            raise SimulationError(f"series diverged at step {t - burn_in} (absolute step {t}); the model looks explosive")
        x[t] = val
    return SeriesSample(np.array(x[burn_in:]), seed=seed, burn_in=burn_in, model=model)


@dataclass(frozen=True)
class StabilityReport:
    coefficient_sums: tuple[float, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.warnings


def check_stability_heuristic(model: SetarModel) -> StabilityReport:
    """Flag regimes whose absolute AR coefficients sum to 1 or more.

    A crude stand-in for geometric ergodicity; simulation is never blocked.
    """
    sums = tuple(float(np.sum(np.abs(row))) for row in model.coef_matrix)
    warnings = tuple(
        f"regime {l}: sum |b| = {s:.3g} >= 1, the series may not be stationary"
        for l, s in enumerate(sums, start=1)
        if s >= 1
    )
    return StabilityReport(sums, warnings)


def write_series_csv(sample: SeriesSample, path) -> None:
    """Write ``t,x`` rows with 17 significant digits (round-trips exactly)."""
    lines = [SERIES_SCHEMA, "t,x"]
    lines.extend(f"{t},{v:.17g}" for t, v in enumerate(sample.values.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_series_csv(path) -> SeriesSample:
    """Parse a series CSV.  Lines starting with ``#`` are skipped.

    Raises
    ------
    ValueError
        Naming the first malformed line.
    """
    values: list[float] = []
    header_seen = False
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line.replace(" ", "") != "t,x":
                    raise ValueError(f"{path}:{lineno}: expected header 't,x', got {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            try:
                if len(parts) != 2:
                    raise ValueError
                t, v = int(parts[0]), float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
            if t != len(values):
                raise ValueError(f"{path}:{lineno}: expected index {len(values)}, got {t}")
            if not math.isfinite(v):
                raise ValueError(f"{path}:{lineno}: non-finite value {parts[1]!r}")
            values.append(v)
    if not header_seen:
        raise ValueError(f"{path}: missing 't,x' header")
    return SeriesSample(np.array(values))
