"""INI files for models and run settings.

A model file::

    [model]
    delay = 2
    delay_bound = 4
    thresholds = 0.0

    [regime.1]
    intercept = 0.0
    coeffs = 0.6
    noise = uniform
    noise_bound = 1.0

A run file has optional ``[estimator]``, ``[detector]``, ``[baseline]`` and
``[wavelet]`` sections whose keys mirror the dataclass fields.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .detector import DetectorConfig
from .estimator import EstimatorConfig
from .setar import NoiseSpec, Regime, SetarModel
from .wavelet import build_wavelet

__all__ = ["ConfigError", "BaselineConfig", "RunConfig", "load_model", "parse_model", "load_run_config", "parse_run_config"]


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _parser(text: str, source: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    return cp


def parse_model(text: str, source: str = "<model>") -> SetarModel:
    cp = _parser(text, source)
    if "model" not in cp:
        raise ConfigError(f"{source}: missing [model] section")
    sec = cp["model"]
    regime_names = sorted((s for s in cp.sections() if s.startswith("regime.")), key=lambda s: int(s.split(".", 1)[1]))
    if not regime_names:
        raise ConfigError(f"{source}: no [regime.N] sections")
    try:
        regimes = []
        for name in regime_names:
            r = cp[name]
            noise = NoiseSpec(
                kind=r.get("noise", "uniform"),
                scale=r.getfloat("noise_scale", 1.0),
                bound=r.getfloat("noise_bound", 1.0),
            )
            regimes.append(Regime(r.getfloat("intercept", 0.0), _floats(r.get("coeffs", "")), noise))
        return SetarModel(
            tuple(regimes),
            _floats(sec.get("thresholds", "")),
            sec.getint("delay"),
            sec.getint("delay_bound"),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_model(path) -> SetarModel:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"model file not found: {path}")
    return parse_model(path.read_text(), str(path))


@dataclass(frozen=True)
class BaselineConfig:
    d_candidates: tuple[int, ...] | None = None
    lambda_lo: float = 0.10
    lambda_hi: float = 0.90
    lambda_step: float = 0.05
    orders: tuple[int, ...] | None = None
    r: int = 1


@dataclass(frozen=True)
class RunConfig:
    detector: DetectorConfig
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    explicit_estimator_keys: frozenset = frozenset()

    def for_model(self, model: SetarModel) -> "RunConfig":
        """Take ``D`` and ``p`` from ``model`` unless the file set them."""
        est = self.detector.estimator
        changes = {}
        if "D" not in self.explicit_estimator_keys:
            changes["D"] = model.delay_bound
        if "p" not in self.explicit_estimator_keys:
            changes["p"] = model.order
        if not changes:
            return self
        return replace(self, detector=replace(self.detector, estimator=replace(est, **changes)))


_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}


def _coerce(name: str, raw: str, annotation: str):
    text = raw.strip()
    if text.lower() in ("none", ""):
        return None
    if "tuple[float, float]" in annotation:
        vals = _floats(text)
        if len(vals) != 2:
            raise ConfigError(f"{name}: expected two numbers")
        return vals
    if "tuple[int" in annotation:
        return _ints(text)
    if annotation.startswith("bool"):
        if text.lower() not in _BOOL:
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return _BOOL[text.lower()]
    if annotation.startswith("int"):
        return int(text)
    if annotation.startswith("float"):
        return float(text)
    return text


def _section_kwargs(cp, section: str, cls, skip=()) -> dict:
    if section not in cp:
        return {}
    known = {f.name: str(f.type) for f in fields(cls) if f.name not in skip}
    out = {}
    for key, raw in cp[section].items():
        if key not in known and key.lower() not in {k.lower() for k in known}:
            raise ConfigError(f"[{section}]: unknown key {key!r}")
        name = next(k for k in known if k.lower() == key.lower())
        try:
            out[name] = _coerce(name, raw, known[name])
        except ValueError as exc:
            raise ConfigError(f"[{section}] {name}: {exc}") from None
    return out


def parse_run_config(text: str = "", source: str = "<config>") -> RunConfig:
    """Build a :class:`RunConfig`; unset estimator ``D``/``p`` default to 4 and 1."""
    cp = _parser(text, source)
    est_kw = _section_kwargs(cp, "estimator", EstimatorConfig, skip=("wavelet",))
    explicit = frozenset(est_kw)
    if "wavelet" in cp:
        w = cp["wavelet"]
        try:
            kw = {}
            if "A" in w:
                kw["A"] = w.getfloat("A")
            if "right_bump" in w:
                kw["right_bump"] = _floats(w["right_bump"])
            if "left_bump_geometry" in w:
                flat = _floats(w["left_bump_geometry"])
                kw["left_bump_geometry"] = (flat[0:2], flat[2:4])
            est_kw["wavelet"] = build_wavelet(**kw)
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"[wavelet]: {exc}") from None
    est_kw.setdefault("D", 4)
    est_kw.setdefault("p", 1)
    det_kw = _section_kwargs(cp, "detector", DetectorConfig, skip=("estimator",))
    base_kw = _section_kwargs(cp, "baseline", BaselineConfig)
    try:
        detector = DetectorConfig(EstimatorConfig(**est_kw), **det_kw)
        baseline = BaselineConfig(**base_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return RunConfig(detector, baseline, explicit)


def load_run_config(path=None) -> RunConfig:
    if path is None:
        return parse_run_config()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_run_config(path.read_text(), str(path))
