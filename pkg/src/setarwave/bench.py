"""Monte Carlo harness: repeated simulate then detect cycles with summary statistics."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baseline import BaselineError, baseline_report, grid_search, quantile_grid
from .config import RunConfig
from .detector import DetectionError, detect
from .estimator import EstimatorError
from .setar import SetarModel, SimulationError, simulate

__all__ = ["RUN_COLUMNS", "SUMMARY_COLUMNS", "BenchResult", "run_one", "run_bench", "summarize", "write_bench", "read_runs", "adjacent_step"]

RUNS_SCHEMA = "# schema: setarwave-bench-runs/1"
SUMMARY_SCHEMA = "# schema: setarwave-bench-summary/1"
TIMINGS_SCHEMA = "# schema: setarwave-bench-timings/1"
METHODS = ("wavelet", "grid-aic")

RUN_COLUMNS = (
    "seed",
    "method",
    "status",
    "d_hat",
    "d_correct",
    "lambda_hats",
    "lambda_error",
    "lambda_tol",
    "lambda_hit",
    "contrast",
    "concordant",
)
SUMMARY_COLUMNS = (
    "method",
    "runs",
    "ok_runs",
    "delay_accuracy",
    "threshold_mae",
    "threshold_hit_rate",
    "median_contrast",
    "concordance",
)


def _lambda_error(estimates, truth) -> float:
    """Mean over true thresholds of the distance to the nearest estimate; NaN if none."""
    if not truth:
        return float("nan")
    if not estimates:
        return float("nan")
    est = np.asarray(estimates)
    return float(np.mean([np.min(np.abs(est - t)) for t in truth]))


def adjacent_step(grid, value: float, toward: float) -> float:
    """Spacing from ``value`` to its neighbour in ``grid`` on the side of ``toward``."""
    g = np.asarray(sorted(grid))
    i = int(np.argmin(np.abs(g - value)))
    j = i + 1 if toward >= g[i] else i - 1
    if 0 <= j < g.size:
        return float(abs(g[j] - g[i]))
    k = i - 1 if j > i else i + 1
    return float(abs(g[k] - g[i])) if 0 <= k < g.size else float("inf")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if np.isnan(v) else repr(v)


def run_one(model: SetarModel, n: int, seed: int, config: RunConfig, methods=("wavelet",)) -> tuple[list[dict], dict]:
    """All requested methods on one simulated series.

    Returns per-method rows and per-method runtimes in seconds.
    """
    truth = list(model.thresholds)
    rows, timings = [], {}
    try:
        series = simulate(model, n, seed)
    except (SimulationError, ValueError) as exc:
        for m in methods:
            rows.append({"seed": seed, "method": m, "status": f"error: {exc}"})
            timings[m] = 0.0
        return rows, timings
    wavelet_lam = None
    for method in methods:
        t0 = time.perf_counter()
        row = {"seed": seed, "method": method}
        try:
            if method == "wavelet":
                rep = detect(series, config.detector)
                tol = 2 * (rep.window[1] - rep.window[0]) / 2**rep.j_n
                row["contrast"] = rep.contrast
            else:
                bc = config.baseline
                D = config.detector.estimator.D
                grid = quantile_grid(series, bc.lambda_lo, bc.lambda_hi, bc.lambda_step)
                orders = bc.orders if bc.orders is not None else config.detector.estimator.p
                fit = grid_search(series, bc.d_candidates or range(1, D + 1), grid, orders, r=bc.r)
                rep = baseline_report(fit)
                tol = None
            lam = [t.lambda_hat for t in rep.thresholds]
            err = _lambda_error(lam, truth)
            row.update(
                status="ok",
                d_hat=rep.d_hat,
                d_correct=rep.d_hat == model.delay,
                lambda_hats=" ".join(repr(float(v)) for v in lam),
                lambda_error=err,
            )
            if tol is not None:
                row["lambda_tol"] = tol
                row["lambda_hit"] = bool(not np.isnan(err) and err <= tol)
            if method == "wavelet" and row["d_correct"] and lam:
                wavelet_lam = lam
            if method == "grid-aic" and wavelet_lam is not None and row["d_correct"] and lam:
                w = wavelet_lam[int(np.argmin(np.abs(np.asarray(wavelet_lam) - lam[0])))]
                row["concordant"] = abs(lam[0] - w) <= adjacent_step(grid, lam[0], w) + 1e-12
        except (DetectionError, EstimatorError, BaselineError, ValueError) as exc:
            row["status"] = f"error: {exc}"
        timings[method] = time.perf_counter() - t0
        rows.append(row)
    return rows, timings


def _task(args):
    return run_one(*args)


@dataclass
class BenchResult:
    rows: list[dict]
    summary: list[dict]
    timings: list[dict]


def summarize(rows: list[dict], methods) -> list[dict]:
    """Aggregates recomputable from the per-run rows."""
    out = []
    for method in methods:
        mine = [r for r in rows if r["method"] == method]
        ok = [r for r in mine if r["status"] == "ok"]
        correct = [r for r in ok if r.get("d_correct")]
        errs = [r["lambda_error"] for r in correct if not np.isnan(r.get("lambda_error", np.nan))]
        hits = [bool(r.get("lambda_hit")) for r in correct if "lambda_hit" in r]
        contrasts = [r["contrast"] for r in ok if r.get("contrast") is not None]
        conc = [bool(r["concordant"]) for r in ok if "concordant" in r]
        out.append(
            {
                "method": method,
                "runs": len(mine),
                "ok_runs": len(ok),
                "delay_accuracy": float(np.mean([bool(r.get("d_correct")) for r in mine])) if mine else float("nan"),
                "threshold_mae": float(np.mean(errs)) if errs else float("nan"),
                "threshold_hit_rate": float(np.mean(hits)) if hits else float("nan"),
                "median_contrast": float(np.median(contrasts)) if contrasts else float("nan"),
                "concordance": float(np.mean(conc)) if conc else float("nan"),
            }
        )
    return out


def run_bench(model: SetarModel, n: int, reps: int, seed: int, config: RunConfig, methods=("wavelet",), jobs: int = 1) -> BenchResult:
    """``reps`` cycles with seeds ``seed .. seed + reps - 1``; rows come back in seed order."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
    methods = tuple(m for m in METHODS if m in methods)
    config = config.for_model(model)
    tasks = [(model, n, seed + i, config, methods) for i in range(reps)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    rows, timings = [], []
    for (r, t), task in zip(results, tasks):
        rows.extend(r)
        timings.extend({"seed": task[2], "method": m, "runtime_s": t[m]} for m in methods)
    return BenchResult(rows, summarize(rows, methods), timings)


def _csv(schema: str, columns, records) -> str:
    buf = io.StringIO()
    buf.write(schema + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([rec.get(c, "") if c in ("method", "status", "lambda_hats") else _fmt(rec.get(c)) for c in columns])
    return buf.getvalue()


def write_bench(result: BenchResult, out_dir, timings_path=None) -> dict[str, Path]:
    """Write ``runs.csv`` and ``summary.csv``; runtimes go only to ``timings_path``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"runs": out / "runs.csv", "summary": out / "summary.csv"}
    paths["runs"].write_text(_csv(RUNS_SCHEMA, RUN_COLUMNS, result.rows))
    paths["summary"].write_text(_csv(SUMMARY_SCHEMA, SUMMARY_COLUMNS, result.summary))
    if timings_path is not None:
        paths["timings"] = Path(timings_path)
        paths["timings"].write_text(_csv(TIMINGS_SCHEMA, ("seed", "method", "runtime_s"), result.timings))
    return paths


def read_runs(path) -> list[dict]:
    """Parse ``runs.csv`` back into row dicts with typed fields."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        row = {"seed": int(rec["seed"]), "method": rec["method"], "status": rec["status"]}
        for key in ("d_hat",):
            if rec[key]:
                row[key] = int(rec[key])
        for key in ("d_correct", "lambda_hit", "concordant"):
            if rec[key]:
                row[key] = rec[key] == "1"
        for key in ("lambda_error", "lambda_tol", "contrast"):
            row[key] = float(rec[key]) if rec[key] else float("nan")
        if rec["contrast"] == "":
            row.pop("contrast")
        row["lambda_hats"] = rec["lambda_hats"]
        rows.append(row)
    return rows
