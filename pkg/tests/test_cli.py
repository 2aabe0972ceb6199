import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from setarwave.bench import read_runs, run_bench, summarize
from setarwave.cli import main
from setarwave.config import ConfigError, load_model, parse_model, parse_run_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MODEL = str(CONFIGS / "two_regime.cfg")


def test_model_file_matches_fixture(two_regime):
    assert load_model(MODEL) == two_regime


def test_model_parse_errors(tmp_path):
    with pytest.raises(ConfigError, match="\\[model\\]"):
        parse_model("[regime.1]\ncoeffs = 0.5\n")
    with pytest.raises(ConfigError, match="regime"):
        parse_model("[model]\ndelay = 1\ndelay_bound = 1\n")
    with pytest.raises(ConfigError):
        parse_model("[model]\ndelay = 1\ndelay_bound = 1\nthresholds = 0\n[regime.1]\ncoeffs = 0.5\n")
    with pytest.raises(ConfigError, match="not found"):
        load_model(tmp_path / "missing.cfg")


def test_run_config_sections():
    run = parse_run_config(
        "[estimator]\nD = 3\np = 2\nN_override = 4096\ninterior_bases = false\nwindow_quantiles = 0.1, 0.9\n"
        "[detector]\ntau = 0.7\ndetect_thresholds = no\n"
        "[baseline]\nd_candidates = 1 2\nlambda_step = 0.1\n"
        "[wavelet]\nA = 3\nright_bump = 2.0 0.5 1.0\nleft_bump_geometry = -1.75 0.5 -2.5 0.5\n"
    )
    est = run.detector.estimator
    assert (est.D, est.p, est.N_override, est.interior_bases, est.window_quantiles) == (3, 2, 4096, False, (0.1, 0.9))
    assert est.wavelet.A == 3.0
    assert run.detector.tau == 0.7 and run.detector.detect_thresholds is False
    assert run.baseline.d_candidates == (1, 2) and run.baseline.lambda_step == 0.1
    defaults = parse_run_config()
    assert (defaults.detector.estimator.D, defaults.detector.estimator.p) == (4, 1)


def test_run_config_errors():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_run_config("[detector]\nbogus = 1\n")
    with pytest.raises(ConfigError, match="boolean"):
        parse_run_config("[detector]\ninterior_only = maybe\n")
    with pytest.raises(ConfigError):
        parse_run_config("[detector]\ntau = 2\n")


def test_for_model_takes_structure_from_model(two_regime):
    run = parse_run_config("").for_model(two_regime)
    assert (run.detector.estimator.D, run.detector.estimator.p) == (4, 1)
    pinned = parse_run_config("[estimator]\nD = 6\n").for_model(two_regime)
    assert pinned.detector.estimator.D == 6


def test_simulate_command(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--model", MODEL, "--n", "5000", "--seed", "7", "--out", str(out1)]) == 0
    assert main(["simulate", "--model", MODEL, "--n", "5000", "--seed", "7", "--out", str(out2)]) == 0
    lines = out1.read_text().splitlines()
    assert lines[0].startswith("# schema:") and lines[1] == "t,x"
    assert len(lines) == 2 + 5000
    assert out1.read_bytes() == out2.read_bytes()
    prov = json.loads((tmp_path / "a.csv.json").read_text())
    assert (prov["seed"], prov["burn_in"], prov["model"]["delay"]) == (7, 500, 2)


def test_simulate_missing_model(tmp_path, capsys):
    assert main(["simulate", "--model", str(tmp_path / "nope.cfg"), "--n", "10", "--seed", "1"]) == 1
    assert "not found" in capsys.readouterr().err


def test_simulate_explosive_model(tmp_path, capsys):
    cfg = tmp_path / "boom.cfg"
    cfg.write_text("[model]\ndelay = 1\ndelay_bound = 1\n[regime.1]\ncoeffs = 3.0\n")
    assert main(["simulate", "--model", str(cfg), "--n", "2000", "--seed", "1", "--out", str(tmp_path / "x.csv")]) == 1
    assert "step" in capsys.readouterr().err


def test_detect_command(tmp_path):
    series = tmp_path / "s.csv"
    main(["simulate", "--model", MODEL, "--n", "5000", "--seed", "7", "--out", str(series)])
    report = tmp_path / "r.json"
    code = main(["detect", str(series), "--out", str(report), "--surface-out", str(tmp_path / "w.csv")])
    data = json.loads(report.read_text())
    assert code in (0, 2) and data["d_hat"] == 2 and data["method"] == "wavelet"
    assert (tmp_path / "w.csv").exists() and (tmp_path / "w.csv.bases.csv").exists()
    assert main(["detect", str(series), "--method", "grid-aic", "--out", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["method"] == "grid-aic" and data["d_hat"] == 2


def test_detect_malformed_csv(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,x\n0,0.1\n1,oops\n")
    assert main(["detect", str(bad)]) == 1
    assert "bad.csv:3" in capsys.readouterr().err


def test_validate_command(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["valid"] is True and data["dead_zone_max_abs"] == 0.0


def test_bench_single_rep(tmp_path):
    assert main(["bench", "--model", MODEL, "--n", "2000", "--reps", "1", "--seed", "3", "--out", str(tmp_path)]) == 0
    runs = [ln for ln in (tmp_path / "runs.csv").read_text().splitlines() if not ln.startswith("#")]
    summary = [ln for ln in (tmp_path / "summary.csv").read_text().splitlines() if not ln.startswith("#")]
    assert len(runs) == 2 and len(summary) == 2


def test_bench_aggregates_recompute(tmp_path, two_regime):
    run = parse_run_config("[baseline]\nlambda_step = 0.1\n")
    res = run_bench(two_regime, 2000, 4, 10, run, methods=("wavelet", "grid-aic"))
    from setarwave.bench import write_bench

    write_bench(res, tmp_path)
    rows = read_runs(tmp_path / "runs.csv")
    again = summarize(rows, ("wavelet", "grid-aic"))
    for got, want in zip(again, res.summary):
        for key, val in want.items():
            if isinstance(val, float) and np.isnan(val):
                assert np.isnan(got[key])
            else:
                assert got[key] == val
    wav = [r for r in rows if r["method"] == "wavelet"]
    assert res.summary[0]["delay_accuracy"] == np.mean([r.get("d_correct", False) for r in wav])
    assert [r["seed"] for r in wav] == [10, 11, 12, 13]


def test_bench_failures_become_rows(tmp_path):
    cfg = tmp_path / "boom.cfg"
    cfg.write_text("[model]\ndelay = 1\ndelay_bound = 1\n[regime.1]\ncoeffs = 3.0\n")
    assert main(["bench", "--model", str(cfg), "--n", "500", "--reps", "2", "--out", str(tmp_path / "o")]) == 0
    rows = read_runs(tmp_path / "o" / "runs.csv")
    assert len(rows) == 2 and all(r["status"].startswith("error") for r in rows)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "setarwave", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "bench" in out.stdout
