"""Command-line interface: ``setarwave {simulate,detect,bench,validate}``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .baseline import BaselineError, baseline_report, grid_search, quantile_grid
from .bench import run_bench, write_bench
from .config import ConfigError, load_model, load_run_config
from .detector import EXIT_ERROR, DetectionError, detect_with_surfaces
from .estimator import EstimatorError, write_surface_csv
from .setar import SimulationError, check_stability_heuristic, read_series_csv, simulate, write_series_csv
from .wavelet import WaveletConstructionError, moment_report

__all__ = ["main", "build_parser"]

PROVENANCE_SCHEMA = "setarwave-provenance/1"
VALIDATE_SCHEMA = "setarwave-wavelet-report/1"


def _write_or_print(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    for w in check_stability_heuristic(model).warnings:
        print(f"warning: {w}", file=sys.stderr)
    sample = simulate(model, args.n, args.seed, burn_in=args.burn_in)
    out = Path(args.out) if args.out else Path(f"series_seed{args.seed}.csv")
    write_series_csv(sample, out)
    prov = {
        "schema": PROVENANCE_SCHEMA,
        "n": args.n,
        "seed": args.seed,
        "burn_in": args.burn_in,
        "model": model.to_dict(),
    }
    out.with_name(out.name + ".json").write_text(json.dumps(prov, indent=2) + "\n")
    return 0


def cmd_detect(args) -> int:
    series = read_series_csv(args.series)
    run = load_run_config(args.config)
    if args.method == "grid-aic":
        bc = run.baseline
        est = run.detector.estimator
        grid = quantile_grid(series, bc.lambda_lo, bc.lambda_hi, bc.lambda_step)
        orders = bc.orders if bc.orders is not None else est.p
        fit = grid_search(series, bc.d_candidates or range(1, est.D + 1), grid, orders, r=bc.r)
        report = baseline_report(fit)
        _write_or_print(report.to_json(), args.out)
        return report.exit_code
    report, surfaces = detect_with_surfaces(series, run.detector)
    if args.surface_out:
        write_surface_csv([s for s in surfaces.values() if s is not None], args.surface_out)
    _write_or_print(report.to_json(), args.out)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return report.exit_code


def cmd_bench(args) -> int:
    model = load_model(args.model)
    run = load_run_config(args.config)
    methods = ("wavelet", "grid-aic") if args.method == "both" else (args.method,)
    result = run_bench(model, args.n, args.reps, args.seed, run, methods=methods, jobs=args.jobs)
    paths = write_bench(result, args.out, timings_path=args.timings)
    for row in result.summary:
        print(
            f"{row['method']}: delay_accuracy={row['delay_accuracy']:.3f} "
            f"threshold_mae={row['threshold_mae']:.4g} median_contrast={row['median_contrast']:.4g} "
            f"ok={row['ok_runs']}/{row['runs']}"
        )
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_validate(args) -> int:
    run = load_run_config(args.config)
    t0 = time.perf_counter()
    rep = moment_report(run.detector.estimator.wavelet)
    elapsed = time.perf_counter() - t0
    body = {"schema": VALIDATE_SCHEMA, **{k: (bool(v) if k == "valid" else v) for k, v in rep.items()}}
    _write_or_print(json.dumps(body, indent=2) + "\n", args.out)
    print(f"validated in {elapsed:.3f} s", file=sys.stderr)
    return 0 if rep["valid"] else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="setarwave", description="Wavelet identification of SETAR delay and thresholds.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a SETAR series to CSV")
    p.add_argument("--model", required=True, help="model INI file")
    p.add_argument("--n", type=int, required=True, help="number of observations to keep")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--out", help="output CSV (default series_seed<SEED>.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="identify delay and thresholds of a series")
    p.add_argument("series", help="series CSV")
    p.add_argument("--config", help="run INI file")
    p.add_argument("--method", choices=("wavelet", "grid-aic"), default="wavelet")
    p.add_argument("--surface-out", help="write W surfaces to this CSV")
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="Monte Carlo simulate/detect cycles")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--seed", type=int, default=0, help="first seed; runs use seed .. seed+reps-1")
    p.add_argument("--config", help="run INI file")
    p.add_argument("--method", choices=("wavelet", "grid-aic", "both"), default="wavelet")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", help="optional per-run runtime CSV (not reproducible)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="check the mother wavelet's moment conditions")
    p.add_argument("--config", help="run INI file with an optional [wavelet] section")
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, OSError, SimulationError, DetectionError, EstimatorError, BaselineError, WaveletConstructionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
