"""Acceptance criteria, one test per criterion, at the stated tolerances."""

import filecmp
import time
from pathlib import Path

import numpy as np
import pytest

from setarwave.bench import run_bench
from setarwave.cli import main
from setarwave.config import parse_run_config
from setarwave.detector import DetectorConfig, resolve_config, detect
from setarwave.estimator import (
    EstimatorConfig,
    brute_force_neighborhood,
    conditional_means,
    grid_params,
    neighborhood,
    surface,
    wavelet_from_means,
)
from setarwave.setar import simulate, skeleton_H
from setarwave.wavelet import kernel_matrix, moment_report, default_wavelet

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MODEL = str(CONFIGS / "two_regime.cfg")
RUN_CFG = str(CONFIGS / "acceptance.ini")
REPS = 30


@pytest.fixture(scope="module")
def bench_result():
    from setarwave.config import load_model, load_run_config

    t0 = time.perf_counter()
    res = run_bench(load_model(MODEL), 5000, REPS, 0, load_run_config(RUN_CFG), methods=("wavelet", "grid-aic"))
    return res, time.perf_counter() - t0


def _summary(res, method):
    return next(r for r in res.summary if r["method"] == method)


def _ratio(scores, d):
    rivals = [v for m, v in scores.items() if m != d and not np.isnan(v)]
    return scores[d] / max(rivals)


def test_criterion_1_wavelet_validity(tmp_path, note):
    t0 = time.perf_counter()
    code = main(["validate", "--out", str(tmp_path / "v.json")])
    elapsed = time.perf_counter() - t0
    rep = moment_report(default_wavelet())
    note(f"int_psi={rep['int_psi']:.1e} int_x_psi={rep['int_x_psi']:.1e} right={rep['right_int_psi']:.3g},{rep['right_int_x_psi']:.3g} t={elapsed:.3f}s")
    assert code == 0
    assert abs(rep["int_psi"]) <= 1e-8 and abs(rep["int_x_psi"]) <= 1e-8
    assert abs(rep["right_int_psi"]) > 1e-3 and abs(rep["right_int_x_psi"]) > 1e-3
    assert rep["dead_zone_max_abs"] == 0.0
    assert elapsed < 1.0


def test_criterion_2_neighborhood_oracle(note):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for _ in range(50):
        D = int(rng.integers(1, 5))
        p = int(rng.integers(1, D + 1))
        n = int(rng.integers(D + 2, 2001))
        x = rng.uniform(-1, 1, n).cumsum() * 0.3
        a, b = np.quantile(x, [0.05, 0.95])
        cfg = EstimatorConfig(D=D, p=p, a=float(a), b=float(b))
        m = int(rng.integers(1, D + 1))
        T = rng.uniform(a, b, D)
        T[p:] = np.where(rng.random(D - p) < 0.7, a, T[p:])
        delta = float(rng.uniform(0.01, 1.0))
        fast = neighborhood(x, m, T, delta, cfg)
        slow = brute_force_neighborhood(x, m, T, delta, cfg)
        assert np.array_equal(fast, slow)
    elapsed = time.perf_counter() - t0
    note(f"50/50 equal, t={elapsed:.2f}s")
    assert elapsed < 10.0


def test_criterion_3_skeleton_oracle(two_regime, note):
    cfg = DetectorConfig(EstimatorConfig(D=4, p=1))
    d = two_regime.delay
    hits = 0
    for seed in range(20):
        s = simulate(two_regime, 8000, seed)
        est, _ = resolve_config(s, cfg)
        g = grid_params(len(s), est)
        K = kernel_matrix(est.wavelet, est.a, est.b, est.j_n, g.N)
        srf = surface(s, d, est)
        eligible = srf.eligible()
        oracle = np.full(2**est.j_n, np.nan)
        for col, base in enumerate(srf.bases):
            _, _, populated = conditional_means(s, d, base, est, g)
            # lag vector (x_{t-1}, x_{t-2}, ...) = (base_1, s, ...): the skeleton uses x_{t-1} and x_{t-d} = s
            H = np.array([skeleton_H(two_regime, [base[0]], si) for si in g.s])
            W, _ = wavelet_from_means(H, populated, K, est.a, est.b)
            oracle = np.fmax(oracle, np.where(eligible[:, col], np.abs(W), np.nan))
        k_emp = int(np.nanargmax(srf.profile()))
        top = np.nanmax(oracle)
        k_oracle = np.flatnonzero(oracle >= top * (1 - 1e-6))
        hits += int(np.min(np.abs(k_oracle - k_emp)) <= 1)
    note(f"agreement {hits}/20")
    assert hits / 20 >= 0.8


def test_criterion_4_delay_recovery(bench_result, note):
    res, elapsed = bench_result
    acc = _summary(res, "wavelet")["delay_accuracy"]
    note(f"delay_accuracy={acc:.3f} over {REPS} runs, bench t={elapsed:.1f}s")
    assert acc >= 0.8
    assert elapsed < 600


def test_criterion_5_threshold_accuracy(bench_result, note):
    res, _ = bench_result
    rows = [r for r in res.rows if r["method"] == "wavelet" and r["status"] == "ok" and r["d_correct"]]
    hits = [bool(r.get("lambda_hit")) for r in rows]
    rate = float(np.mean(hits))
    note(f"|lambda_hat| <= 2(b-a)/2^j_n in {sum(hits)}/{len(rows)} runs with correct d")
    assert rate >= 0.8


def test_criterion_6_contrast_separation(two_regime, null_ar1, bench_result, note):
    res, _ = bench_result
    cfg = DetectorConfig(EstimatorConfig(D=4, p=1))
    d = two_regime.delay
    signal = [_ratio(detect(simulate(two_regime, 5000, seed), cfg).per_lag_score, d) for seed in range(REPS)]
    null = [_ratio(detect(simulate(null_ar1, 5000, seed), cfg).per_lag_score, d) for seed in range(REPS)]
    med_s, med_n = float(np.median(signal)), float(np.median(null))
    note(f"median ratio signal={med_s:.3f} null={med_n:.3f} bench median contrast={_summary(res, 'wavelet')['median_contrast']:.3f}")
    assert med_s >= 1.5
    assert med_n < 1.3


def test_criterion_7_decay(two_regime, note):
    cfg = DetectorConfig(EstimatorConfig(D=4, p=1))
    d = two_regime.delay
    good = 0
    for seed in range(20):
        stats = []
        for n in (500, 2000, 8000):
            rep = detect(simulate(two_regime, n, seed), cfg)
            rivals = [v for m, v in rep.per_lag_score.items() if m != d and not np.isnan(v)]
            stats.append(2.0 ** (2 * rep.j_n) * max(rivals))
        good += int(stats[0] >= stats[1] >= stats[2])
    note(f"non-increasing in {good}/20 seeds")
    assert good / 20 >= 0.7


def test_criterion_8_baseline_concordance(bench_result, note):
    res, _ = bench_result
    summ = _summary(res, "grid-aic")
    note(f"grid-aic delay_accuracy={summ['delay_accuracy']:.3f} concordance={summ['concordance']:.3f}")
    assert summ["delay_accuracy"] >= 0.8
    assert summ["concordance"] >= 0.7


def test_criterion_9_determinism(tmp_path, note):
    args = ["bench", "--model", MODEL, "--n", "5000", "--reps", "8", "--seed", "100", "--method", "both", "--config", RUN_CFG]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    note(f"{len(match)} files byte-identical")
    assert names == ["runs.csv", "summary.csv"]
    assert not mismatch and not errors
