"""Mother wavelet with a dead zone on [-1, 1], its dilates and periodization.

The wavelet is a sum of three raised-cosine (cos^2) bumps: one on (1, A) and
two on (-A, -1).  The right bump is free; the two left amplitudes are solved
so that the zeroth and first moments vanish.  Every bump is C^1, so psi is
piecewise C^1 and of bounded variation, and it is exactly zero on [-1, 1] and
outside (-A, A).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

__all__ = [
    "Bump",
    "WaveletSpec",
    "WaveletConstructionError",
    "PeriodizationWindow",
    "build_wavelet",
    "default_wavelet",
    "eval_psi",
    "eval_psi_jk",
    "eval_psi_per",
    "kernel_matrix",
    "wavelet_coefficient",
    "moment_report",
    "is_interior",
    "step_response",
]

MOMENT_TOL = 1e-8
ONE_SIDED_MIN = 1e-3
QUADRATURE_NODES = 10_000


class WaveletConstructionError(ValueError):
    """Raised when a bump geometry cannot produce a valid wavelet."""


@dataclass(frozen=True)
class Bump:
    """Raised-cosine bump ``amplitude * cos^2(pi (x - center) / width)``.

    The support is the open interval ``(center - width/2, center + width/2)``.
    """

    center: float
    width: float
    amplitude: float

    @property
    def lo(self) -> float:
        return self.center - self.width / 2

    @property
    def hi(self) -> float:
        return self.center + self.width / 2

    @property
    def mass(self) -> float:
        return self.amplitude * self.width / 2

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = x - self.center
        inside = np.abs(z) < self.width / 2
        return np.where(inside, self.amplitude * np.cos(np.pi * z / self.width) ** 2, 0.0)


@dataclass(frozen=True)
class WaveletSpec:
    """Immutable description of a mother wavelet.

    Use :func:`build_wavelet` rather than the constructor: it solves the
    left amplitudes and checks every invariant.
    """

    A: float
    right_bump: Bump
    left_bumps: tuple[Bump, Bump]

    @property
    def bumps(self) -> tuple[Bump, ...]:
        return (self.right_bump, *self.left_bumps)


def _check_inside(bump: Bump, lo: float, hi: float, name: str) -> None:
    if not (bump.width > 0 and lo < bump.lo and bump.hi < hi):
        raise WaveletConstructionError(
            f"{name} support ({bump.lo:g}, {bump.hi:g}) must lie strictly inside ({lo:g}, {hi:g})"
        )


def build_wavelet(
    A: float = 7.0,
    right_bump: tuple[float, float, float] = (1.45, 0.8, 1.0),
    left_bump_geometry: tuple[tuple[float, float], tuple[float, float]] = ((-1.55, 1.0), (-6.55, 0.8)),
) -> WaveletSpec:
    """Construct a wavelet from bump geometry.

    Parameters
    ----------
    A : float
        Support half-width, ``A > 1``.
    right_bump : (center, width, amplitude)
        The free bump on ``(1, A)``.
    left_bump_geometry : ((center, width), (center, width))
        Geometry of the two bumps on ``(-A, -1)``.  Their amplitudes are
        solved so that ``int psi = 0`` and ``int x psi = 0``.

    Raises
    ------
    WaveletConstructionError
        If a support leaves its half-interval, the left moment system is
        singular, or a one-sided moment on ``[1, A]`` is below 1e-3.
    """
    if not A > 1:
        raise WaveletConstructionError(f"A must exceed 1, got {A}")
    rc, rw, ra = (float(v) for v in right_bump)
    right = Bump(rc, rw, ra)
    _check_inside(right, 1.0, A, "right bump")
    (c1, w1), (c2, w2) = ((float(c), float(w)) for c, w in left_bump_geometry)
    for i, (c, w) in enumerate(((c1, w1), (c2, w2)), start=1):
        _check_inside(Bump(c, w, 1.0), -A, -1.0, f"left bump {i}")

    # masses m_i = amp_i * w_i / 2 solve  m1 + m2 = -M_R,  c1 m1 + c2 m2 = -c_R M_R
    system = np.array([[1.0, 1.0], [c1, c2]])
    if c1 == c2 or np.linalg.cond(system) > 1e12:
        raise WaveletConstructionError("left bumps share a center: moment system is singular")
    masses = np.linalg.solve(system, [-right.mass, -rc * right.mass])
    left = (Bump(c1, w1, float(2 * masses[0] / w1)), Bump(c2, w2, float(2 * masses[1] / w2)))
    first, second = sorted(left, key=lambda bp: bp.lo)
    if first.hi > second.lo:
        raise WaveletConstructionError("left bumps overlap")

    spec = WaveletSpec(float(A), right, left)
    report = moment_report(spec)
    if abs(report["right_int_psi"]) <= ONE_SIDED_MIN or abs(report["right_int_x_psi"]) <= ONE_SIDED_MIN:
        raise WaveletConstructionError(
            "one-sided moments on [1, A] must be nonzero "
            f"(got {report['right_int_psi']:.3g}, {report['right_int_x_psi']:.3g})"
        )
    return spec


@lru_cache(maxsize=1)
def default_wavelet() -> WaveletSpec:
    """The package default: ``A = 7`` with small, well-separated bumps."""
    return build_wavelet()


def eval_psi(spec: WaveletSpec, x):
    """Evaluate the mother wavelet.  Returns exactly 0 for ``|x| <= 1`` or ``|x| >= A``."""
    arr = np.asarray(x, dtype=float)
    out = np.zeros_like(arr)
    live = (np.abs(arr) > 1.0) & (np.abs(arr) < spec.A)
    if np.any(live):
        xl = arr[live]
        out[live] = sum(b(xl) for b in spec.bumps)
    return out if out.ndim else float(out)


def eval_psi_jk(spec: WaveletSpec, j: int, k: int, x):
    """``2^{j/2} psi(2^j x - k)``."""
    if j < 0:
        raise ValueError(f"scale j must be nonnegative, got {j}")
    scale = 2.0**j
    return np.sqrt(scale) * eval_psi(spec, scale * np.asarray(x, dtype=float) - k)


@dataclass(frozen=True)
class PeriodizationWindow:
    a: float
    b: float
    j: int
    k: int

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"window needs a < b, got [{self.a}, {self.b}]")
        if self.j < 0 or not 0 <= self.k < 2**self.j:
            raise ValueError(f"translation k={self.k} outside 0..{2**self.j - 1} at scale j={self.j}")


def is_interior(j: int, k: int, A: float) -> bool:
    """Whether ``[(k - A) / 2^j, (k + A) / 2^j]`` lies in ``[0, 1]``."""
    return k - A >= 0 and k + A <= 2**j


def eval_psi_per(spec: WaveletSpec, window: PeriodizationWindow, x):
    """Periodized wavelet on ``[a, b]``.

    Only translates ``n`` with ``2^j (u + n) - k`` inside ``(-A, A)`` are
    summed, where ``u`` is the fractional part of ``(x - a) / (b - a)``.
    """
    a, b, j, k = window.a, window.b, window.j, window.k
    arr = np.asarray(x, dtype=float)
    u = (arr - a) / (b - a)
    u = u - np.floor(u)
    scale = 2.0**j
    n_lo = np.ceil((k - spec.A) / scale - u)
    n_hi = np.floor((k + spec.A) / scale - u)
    out = np.zeros_like(u)
    if u.size:
        for n in range(int(np.min(n_lo)), int(np.max(n_hi)) + 1):
            use = (n >= n_lo) & (n <= n_hi)
            if np.any(use):
                out = out + np.where(use, eval_psi_jk(spec, j, k, u + n), 0.0)
    out = out / np.sqrt(b - a)
    return out if out.ndim else float(out)


@lru_cache(maxsize=16)
def _kernel_matrix_cached(spec: WaveletSpec, a: float, b: float, j: int, N: int) -> np.ndarray:
    s = a + np.arange(1, N + 1) * (b - a) / N
    rows = [eval_psi_per(spec, PeriodizationWindow(a, b, j, k), s) for k in range(2**j)]
    K = np.vstack(rows)
    K.flags.writeable = False
    return K


def kernel_matrix(spec: WaveletSpec, a: float, b: float, j: int, N: int) -> np.ndarray:
    """``K[k, i] = psi^per_{j,k}(s_i)`` with ``s_i = a + i (b - a) / N``, ``i = 1..N``."""
    return _kernel_matrix_cached(spec, float(a), float(b), int(j), int(N))


def wavelet_coefficient(f_samples, window: PeriodizationWindow, spec: WaveletSpec | None = None) -> float:
    """Simpson approximation of ``int_a^b psi^per_{j,k}(x) f(x) dx``.

    ``f_samples`` holds f on a uniform grid over ``[a, b]`` including both ends.
    Meant for tests; the detector works with Riemann sums instead.
    """
    spec = spec or default_wavelet()
    f = np.asarray(f_samples, dtype=float)
    need = 2 ** (window.j + 4)
    if f.ndim != 1 or f.size < need:
        raise ValueError(f"need at least {need} samples for scale j={window.j}, got {f.size}")
    x = np.linspace(window.a, window.b, f.size)
    return float(simpson(eval_psi_per(spec, window, x) * f, x=x))


def _integrate(spec: WaveletSpec, weight, lo: float, hi: float, nodes: int) -> float:
    per_bump = max(3, nodes // len(spec.bumps)) | 1
    total = 0.0
    for bump in spec.bumps:
        l, h = max(lo, bump.lo), min(hi, bump.hi)
        if h <= l:
            continue
        x = np.linspace(l, h, per_bump)
        total += simpson(weight(x) * eval_psi(spec, x), x=x)
    return float(total)


def _integrate_sq(spec: WaveletSpec, nodes: int) -> float:
    per_bump = max(3, nodes // len(spec.bumps)) | 1
    return float(sum(simpson(eval_psi(spec, x) ** 2, x=x) for x in (np.linspace(bp.lo, bp.hi, per_bump) for bp in spec.bumps)))


def moment_report(spec: WaveletSpec, nodes: int = QUADRATURE_NODES) -> dict:
    """Moments and support checks by composite Simpson on each bump support."""
    one = lambda x: np.ones_like(x)  # noqa: E731
    ident = lambda x: x  # noqa: E731
    probe_dead = np.linspace(-1.0, 1.0, 20_001)
    probe_out = np.concatenate([np.linspace(-spec.A - 10, -spec.A, 1001), np.linspace(spec.A, spec.A + 10, 1001)])
    report = {
        "A": spec.A,
        "int_psi": _integrate(spec, one, -spec.A, spec.A, nodes),
        "int_x_psi": _integrate(spec, ident, -spec.A, spec.A, nodes),
        "int_psi_sq": _integrate_sq(spec, nodes),
        "right_int_psi": _integrate(spec, one, 1.0, spec.A, nodes),
        "right_int_x_psi": _integrate(spec, ident, 1.0, spec.A, nodes),
        "dead_zone_max_abs": float(np.max(np.abs(eval_psi(spec, probe_dead)))),
        "outside_max_abs": float(np.max(np.abs(eval_psi(spec, probe_out)))),
    }
    report["valid"] = bool(
        abs(report["int_psi"]) <= MOMENT_TOL
        and abs(report["int_x_psi"]) <= MOMENT_TOL
        and report["int_psi_sq"] > 0
        and abs(report["right_int_psi"]) > ONE_SIDED_MIN
        and abs(report["right_int_x_psi"]) > ONE_SIDED_MIN
        and report["dead_zone_max_abs"] == 0.0
        and report["outside_max_abs"] == 0.0
    )
    return report


def step_response(spec: WaveletSpec, z) -> np.ndarray:
    """``int_z^inf psi``: the response of psi to a unit step placed at ``z``.

    Constant at ``int_1^A psi`` across the dead zone.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.zeros_like(z)
    for bump in spec.bumps:
        t = np.clip((z - bump.lo) / bump.width, 0.0, 1.0)
        # closed form of int_{z}^{hi} amp cos^2(pi (x - c) / w) dx
        frac = 1.0 - t - np.sin(2 * np.pi * (t - 0.5)) / (2 * np.pi)
        out += bump.mass * frac
    return out
