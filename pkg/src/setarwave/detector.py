"""Scale selection, delay identification and threshold localization from W surfaces."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .estimator import EmpiricalWaveletSurface, EstimatorConfig, EstimatorError, grid_size, surface
from .setar import SeriesSample

__all__ = [
    "DetectionError",
    "DetectorConfig",
    "ScalePlan",
    "PeakBand",
    "ThresholdEstimate",
    "DelayResult",
    "DetectionReport",
    "choose_scale",
    "peak_band",
    "cluster_profile",
    "detect_delay",
    "detect_thresholds",
    "detect",
    "detect_with_surfaces",
    "resolve_config",
    "REPORT_SCHEMA",
]

REPORT_SCHEMA = "setarwave-report/1"
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LOW_CONTRAST = 2


class DetectionError(ValueError):
    pass


@dataclass(frozen=True)
class ScalePlan:
    j_n: int
    N: int
    slack: float


@dataclass(frozen=True)
class DetectorConfig:
    """Detector settings.

    ``c_min`` sets the absolute floor ``c_min * 2^{-3 j_n / 2}`` below which a
    peak cluster is reported as rejected.  Its default was calibrated on
    linear AR(1) series with uniform noise on [-1, 1].
    """

    estimator: EstimatorConfig
    slack_max: float = 0.125
    tau: float = 0.5
    contrast_floor: float = 1.5
    c_min: float = 5.0
    cluster_gap: int = 2
    detect_thresholds: bool = True
    interior_only: bool = True
    allow_low_confidence: bool = False

    def __post_init__(self):
        if not 0 < self.slack_max:
            raise DetectionError("slack_max must be positive")
        if not 0 < self.tau <= 1:
            raise DetectionError(f"tau must lie in (0, 1], got {self.tau}")
        if self.c_min < 0:
            raise DetectionError("c_min must be nonnegative")
        if self.cluster_gap < 1:
            raise DetectionError("cluster_gap must be >= 1")


def choose_scale(n: int, config: EstimatorConfig, slack_max: float = 0.125) -> ScalePlan:
    """Largest ``j >= 1`` with ``2^{3j} <= slack_max * N``.

    An explicit ``config.j_n`` is honoured when it satisfies the same bound.
    """
    try:
        N = grid_size(n, config)
    except EstimatorError as exc:
        raise DetectionError(str(exc)) from None
    if config.j_n is not None:
        j = config.j_n
        if 2.0 ** (3 * j) > slack_max * N:
            raise DetectionError(f"j_n = {j} violates 2^(3 j_n) <= slack_max * N = {slack_max * N:g}; lower j_n or raise N")
        return ScalePlan(j, N, 2.0 ** (3 * j) / N)
    j = 0
    while 2.0 ** (3 * (j + 1)) <= slack_max * N:
        j += 1
    if j < 1:
        raise DetectionError(
            f"no detection scale fits N = {N} grid points at slack_max = {slack_max:g}; "
            "use a longer series, a larger N_override or a larger slack_max"
        )
    return ScalePlan(j, N, 2.0 ** (3 * j) / N)


@dataclass(frozen=True)
class PeakBand:
    center: float
    half_width: float
    members: tuple[int, ...]


def peak_band(center: float, half_width: float, a: float, b: float, j: int) -> PeakBand:
    """Translations whose grid location lies within ``half_width`` of ``center``."""
    loc = a + np.arange(2**j) * (b - a) / 2**j
    members = tuple(int(k) for k in np.flatnonzero(np.abs(loc - center) <= half_width))
    return PeakBand(center, half_width, members)


def cluster_profile(P: np.ndarray, tau: float, gap: int) -> list[list[int]]:
    """Group translations with ``P(k) >= tau * max P`` into runs whose gaps are at most ``gap``.

    NaN entries are never selected.  Returns an empty list when ``max P`` is 0.
    """
    P = np.asarray(P, dtype=float)
    if P.size == 0 or np.all(np.isnan(P)):
        raise DetectionError("empty profile: no eligible translation at this scale")
    top = np.nanmax(P)
    if top <= 0:
        return []
    selected = np.flatnonzero(np.nan_to_num(P, nan=-np.inf) >= tau * top)
    clusters: list[list[int]] = []
    for k in selected.tolist():
        if clusters and k - clusters[-1][-1] <= gap:
            clusters[-1].append(k)
        else:
            clusters.append([k])
    return clusters


@dataclass(frozen=True)
class ThresholdEstimate:
    lambda_hat: float
    k_star: int
    score: float
    cluster_width: int


@dataclass(frozen=True)
class DelayResult:
    d_hat: int
    per_lag_score: dict
    contrast: float
    tie: bool
    warnings: tuple[str, ...]


def resolve_config(series, config: DetectorConfig) -> tuple[EstimatorConfig, ScalePlan]:
    """Estimator settings with the window and detection scale filled in for ``series``."""
    x = series.values if isinstance(series, SeriesSample) else np.asarray(series, dtype=float)
    est = config.estimator
    plan = choose_scale(x.size, est, config.slack_max)
    try:
        est = est if est.resolved else est.with_window(x)
    except EstimatorError as exc:
        raise DetectionError(str(exc)) from None
    return replace(est, j_n=plan.j_n), plan


def _surfaces(series, est: EstimatorConfig, lags) -> dict[int, EmpiricalWaveletSurface]:
    out = {}
    for m in lags:
        try:
            out[m] = surface(series, m, est)
        except EstimatorError:
            out[m] = None
    return out


def _score(srf: EmpiricalWaveletSurface | None, config: DetectorConfig) -> float:
    if srf is None:
        return float("nan")
    prof = srf.profile(config.interior_only, config.allow_low_confidence)
    return float(np.nanmax(prof)) if not np.all(np.isnan(prof)) else float("nan")


def detect_delay(series, config: DetectorConfig, surfaces: dict | None = None) -> DelayResult:
    """Lag whose surface carries the largest eligible ``|W|``.

    Ties go to the smaller lag and are flagged.  ``contrast`` is the winning
    score over the best competing one.
    """
    est, _ = resolve_config(series, config)
    D = est.D
    surfaces = surfaces if surfaces is not None else _surfaces(series, est, range(1, D + 1))
    scores = {m: _score(surfaces.get(m), config) for m in range(1, D + 1)}
    finite = {m: v for m, v in scores.items() if not np.isnan(v)}
    if not finite:
        raise DetectionError("every surface is absent or below the populated floor; widen the window or lengthen the series")
    best = max(finite.values())
    winners = sorted(m for m, v in finite.items() if v == best)
    d_hat = winners[0]
    rivals = [v for m, v in finite.items() if m != d_hat]
    if D == 1:
        contrast = 1.0
    elif not rivals or max(rivals) == 0:
        contrast = float("inf") if best > 0 else 1.0
    else:
        contrast = best / max(rivals)
    warnings = []
    if len(winners) > 1:
        warnings.append(f"tie between lags {winners}; picked the smallest")
    if D > 1 and contrast < config.contrast_floor:
        warnings.append(f"contrast {contrast:.3g} below {config.contrast_floor:g}: delay identification is unreliable")
    return DelayResult(d_hat, scores, float(contrast), len(winners) > 1, tuple(warnings))


def detect_thresholds(series, d_hat: int, config: DetectorConfig, srf: EmpiricalWaveletSurface | None = None):
    """Threshold estimates from the peak clusters of the lag-``d_hat`` profile.

    Returns ``(accepted, rejected)``; clusters whose peak falls below the
    absolute floor ``c_min * 2^{-3 j_n / 2}`` are rejected.
    """
    est, plan = resolve_config(series, config)
    if srf is None:
        try:
            srf = surface(series, d_hat, est)
        except EstimatorError as exc:
            raise DetectionError(str(exc)) from None
    P = srf.profile(config.interior_only, config.allow_low_confidence)
    clusters = cluster_profile(P, config.tau, config.cluster_gap)
    floor = config.c_min * 2.0 ** (-1.5 * srf.j)
    accepted, rejected = [], []
    for members in clusters:
        vals = P[members]
        k_star = members[int(np.argmax(vals))]
        est_ = ThresholdEstimate(
            lambda_hat=float(srf.a + k_star * (srf.b - srf.a) / 2**srf.j),
            k_star=int(k_star),
            score=float(P[k_star]),
            cluster_width=members[-1] - members[0] + 1,
        )
        (accepted if est_.score >= floor else rejected).append(est_)
    return accepted, rejected


@dataclass(frozen=True)
class DetectionReport:
    """Outcome of a detection run; ``to_json`` keeps a fixed field order."""

    method: str
    d_hat: int
    contrast: float | None
    thresholds: tuple[ThresholdEstimate, ...]
    per_lag_score: dict = field(default_factory=dict)
    rejected_thresholds: tuple[ThresholdEstimate, ...] = ()
    tie: bool = False
    j_n: int | None = None
    N: int | None = None
    slack: float | None = None
    delta: float | None = None
    window: tuple[float, float] | None = None
    warnings: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def r_hat(self) -> int:
        return len(self.thresholds)

    @property
    def low_contrast(self) -> bool:
        return any("contrast" in w for w in self.warnings)

    @property
    def exit_code(self) -> int:
        return EXIT_LOW_CONTRAST if self.low_contrast else EXIT_OK

    def to_dict(self) -> dict:
        def num(v):
            if v is None:
                return None
            v = float(v)
            return v if np.isfinite(v) else None

        return {
            "schema": REPORT_SCHEMA,
            "method": self.method,
            "d_hat": self.d_hat,
            "contrast": num(self.contrast),
            "r_hat": self.r_hat,
            "thresholds": [asdict(t) for t in self.thresholds],
            "rejected_thresholds": [asdict(t) for t in self.rejected_thresholds],
            "per_lag_score": {str(m): num(v) for m, v in sorted(self.per_lag_score.items())},
            "tie": self.tie,
            "j_n": self.j_n,
            "N": self.N,
            "slack": self.slack,
            "delta": self.delta,
            "window": list(self.window) if self.window is not None else None,
            "warnings": list(self.warnings),
            **self.extra,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"


def _config_echo(config: DetectorConfig, est: EstimatorConfig) -> dict:
    e = {k: v for k, v in asdict(est).items() if k != "wavelet"}
    e["window_quantiles"] = list(est.window_quantiles)
    w = est.wavelet
    e["wavelet"] = {"A": w.A, "bumps": [[bp.center, bp.width, bp.amplitude] for bp in w.bumps]}
    d = {k: v for k, v in asdict(config).items() if k != "estimator"}
    return {"estimator": e, "detector": d}


def detect(series, config: DetectorConfig) -> DetectionReport:
    """Scale choice, per-lag surfaces, delay and thresholds in one pass."""
    return detect_with_surfaces(series, config)[0]


def detect_with_surfaces(series, config: DetectorConfig):
    """:func:`detect` plus the per-lag surfaces it was computed from."""
    est, plan = resolve_config(series, config)
    surfaces = _surfaces(series, est, range(1, est.D + 1))
    delay = detect_delay(series, config, surfaces)
    accepted, rejected = [], []
    if config.detect_thresholds:
        accepted, rejected = detect_thresholds(series, delay.d_hat, config, surfaces[delay.d_hat])
    srf = surfaces[delay.d_hat]
    report = DetectionReport(
        method="wavelet",
        d_hat=delay.d_hat,
        contrast=delay.contrast,
        thresholds=tuple(accepted),
        per_lag_score=delay.per_lag_score,
        rejected_thresholds=tuple(rejected),
        tie=delay.tie,
        j_n=plan.j_n,
        N=plan.N,
        slack=plan.slack,
        delta=srf.delta,
        window=(est.a, est.b),
        warnings=delay.warnings,
        config=_config_echo(config, est),
    )
    return report, surfaces
