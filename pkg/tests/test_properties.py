import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from setarwave.detector import DetectionError, choose_scale, cluster_profile
from setarwave.estimator import EstimatorConfig, brute_force_neighborhood, conditional_means, grid_params, neighborhood
from setarwave.setar import NoiseSpec, Regime, SeriesSample, SetarModel, read_series_csv, regime_index, write_series_csv
from setarwave.wavelet import default_wavelet, eval_psi

finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def neighborhood_case(draw):
    D = draw(st.integers(1, 4))
    p = draw(st.integers(1, D))
    n = draw(st.integers(D + 2, 120))
    x = draw(arrays(float, n, elements=st.floats(-2, 2, allow_nan=False, width=32)))
    m = draw(st.integers(1, D))
    T = np.array(draw(st.lists(st.floats(-2, 2, width=32), min_size=D, max_size=D)))
    if draw(st.booleans()):
        T[p:] = -2.0
    delta = draw(st.floats(0.0, 3.0))
    return x, EstimatorConfig(D=D, p=p, a=-2.0, b=2.0), m, T, delta


@settings(max_examples=150, deadline=None)
@given(neighborhood_case())
def test_neighborhood_equals_brute_force(case):
    x, cfg, m, T, delta = case
    np.testing.assert_array_equal(neighborhood(x, m, T, delta, cfg), brute_force_neighborhood(x, m, T, delta, cfg))


@settings(max_examples=40, deadline=None)
@given(neighborhood_case(), st.integers(4, 64))
def test_sweep_equals_brute_force(case, N):
    x, cfg, m, T, _ = case
    cfg = EstimatorConfig(D=cfg.D, p=cfg.p, a=-2.0, b=2.0, N_override=N)
    g = grid_params(x.size, cfg)
    base = np.delete(T, m - 1)
    fast = conditional_means(x, m, base, cfg, g)
    slow = conditional_means(x, m, base, cfg, g, method="brute")
    np.testing.assert_array_equal(fast[1], slow[1])
    np.testing.assert_allclose(fast[0], slow[0], rtol=1e-12, atol=1e-12, equal_nan=True)


profiles = arrays(float, st.integers(1, 40), elements=st.floats(0, 10, allow_nan=False))


@settings(max_examples=200)
@given(profiles, st.floats(0.05, 1.0), st.integers(1, 4))
def test_cluster_soundness(P, tau, gap):
    clusters = cluster_profile(P, tau, gap)
    seen = set()
    for members in clusters:
        assert members == sorted(members)
        assert all(b - a <= gap for a, b in zip(members, members[1:]))
        assert not seen & set(members)
        seen |= set(members)
        for k in members:
            assert P[k] >= tau * P.max()
    assert all(b[0] - a[-1] > gap for a, b in zip(clusters, clusters[1:]))
    if P.max() > 0:
        assert seen == set(np.flatnonzero(P >= tau * P.max()).tolist())


@settings(max_examples=100)
@given(profiles, st.sampled_from([0.5, 2.0, 4.0, 0.125]))
def test_cluster_scale_invariance(P, alpha):
    # powers of two keep the comparisons exact
    assert cluster_profile(alpha * P, 0.5, 2) == cluster_profile(P, 0.5, 2)


@given(st.integers(2, 2**30), st.sampled_from([1 / 64, 1 / 8, 1.0]))
def test_scale_plan_slack(N, slack_max):
    cfg = EstimatorConfig(D=1, p=1, N_override=N)
    try:
        plan = choose_scale(100, cfg, slack_max)
    except DetectionError:
        assert 8 > slack_max * N
        return
    assert plan.slack <= slack_max and plan.j_n >= 1
    assert 2.0 ** (3 * (plan.j_n + 1)) > slack_max * N
    bigger = choose_scale(100, EstimatorConfig(D=1, p=1, N_override=2 * N), slack_max)
    assert bigger.j_n >= plan.j_n


@given(st.lists(finite, min_size=0, max_size=5, unique=True), finite)
def test_regime_partition(thresholds, v):
    thresholds = sorted(thresholds)
    regs = tuple(Regime(0.0, (0.0,)) for _ in range(len(thresholds) + 1))
    model = SetarModel(regs, tuple(thresholds), 1, 1)
    l = regime_index(model, v)
    bounds = [-math.inf, *thresholds, math.inf]
    assert 1 <= l <= len(thresholds) + 1
    assert bounds[l - 1] < v <= bounds[l]


@settings(max_examples=50, deadline=None)
@given(arrays(float, st.integers(0, 50), elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_csv_round_trip(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("csv") / "s.csv"
    write_series_csv(SeriesSample(values), path)
    assert np.array_equal(read_series_csv(path).values, values)


@given(st.floats(-1, 1))
def test_dead_zone(x):
    assert eval_psi(default_wavelet(), x) == 0.0


@given(st.floats(0.01, 5.0), st.integers(0, 2**32 - 1))
def test_noise_bound(bound, seed):
    for kind in ("uniform", "truncated-gaussian"):
        draws = NoiseSpec(kind, 1.0, bound).draw(np.random.default_rng(seed), 200)
        assert draws.shape == (200,) and np.all(np.abs(draws) <= bound)
