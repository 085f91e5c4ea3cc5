import math

import numpy as np
import pytest
from scipy.stats import norm

from frechet_vcm.errors import ConfigurationError
from frechet_vcm.metric_spaces import quantile_grid
from frechet_vcm.model_selection import CVConfig
from frechet_vcm.simulation import (
    SIGMA_FLOOR,
    DGPConfig,
    _modifier,
    _response,
    format_table,
    gen_example,
    gen_predictors,
    run_benchmark,
)


def test_predictor_distribution():
    S, T = gen_predictors(50000, 7)
    C = np.cov(S, rowvar=False)
    target = 0.5 ** np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
    assert np.max(np.abs(C - target)) < 0.02
    assert abs(T.mean() - 0.5) < 0.01
    np.testing.assert_array_equal(T, norm.cdf(S[:, 3]))


def test_example1_monte_carlo_mean():
    cfg = DGPConfig.for_example(1, gamma2=3.0, gamma3=3.0)
    N = 100000
    x, t = np.array([0.4, -0.7, 0.3]), 0.35
    X, T = np.tile(x, (N, 1)), np.full(N, t)
    Y, truth = _response(cfg, X, T, np.random.default_rng(5))
    mean_mu = 1 + 2 * t * x[0] + 3 * t**2 * x[1]
    s = 2 + 3 * np.sin(np.pi * t) * x[2]
    expected = mean_mu + s * norm.ppf(quantile_grid(20))
    np.testing.assert_allclose(truth[0], expected, rtol=1e-14)
    se = Y.std(axis=0) / math.sqrt(N)
    assert np.all(np.abs(Y.mean(axis=0) - expected) < 3 * se)


def test_sigma_term_clamped():
    cfg = DGPConfig.for_example(1, gamma3=3.0)
    X = np.array([[0.0, 0.0, -5.0]])
    _, truth = _response(cfg, X, np.array([0.5]), np.random.default_rng(0))
    # sigma term 2 - 15 < 0 is clamped, so the truth keeps a tiny positive spread
    np.testing.assert_allclose(np.diff(truth[0]), SIGMA_FLOOR * np.diff(norm.ppf(quantile_grid(20))))


def test_example4_noise_free_limit():
    cfg = DGPConfig.for_example(4, nu1=1e-10, nu2=1e-10, N=20000)
    x, t = np.array([0.5, 0.2, 0.1]), 0.6
    X, T = np.tile(x, (4, 1)), np.full(4, t)
    Y, truth = _response(cfg, X, T, np.random.default_rng(2))
    mu = 1 + 2 * t * x[0] + 1 * t**2 * x[1]
    s = 2 + 1 * np.sin(np.pi * t) * x[2]
    B = np.array([[mu + s, s], [0.0, mu + s]])
    np.testing.assert_allclose(truth[0], B.T @ B, rtol=1e-12)
    for P in Y:
        assert np.max(np.abs(P - truth[0])) <= 0.05 * np.max(np.abs(truth[0]))


def test_example2_modifier_mean():
    cfg = DGPConfig.for_example(2)
    N, t = 100000, 0.3
    U = _modifier(cfg, np.full(N, t), np.random.default_rng(9))
    expected = (2 + 3 * t) * norm.ppf(quantile_grid(20))
    se = U.std(axis=0) / math.sqrt(N)
    assert np.all(np.abs(U.mean(axis=0) - expected) < 3 * se)


def test_example3_modifier_mean():
    cfg = DGPConfig.for_example(3)
    N, t = 100000, 0.7
    U = _modifier(cfg, np.full(N, t), np.random.default_rng(4))
    mu, sbar, nu = 2 + t, 2 + 3 * t, 1.0
    ea2 = mu**2 + 2 * mu * sbar + sbar**2 + nu
    eas = mu * sbar + sbar**2 + nu
    expected = np.array([[ea2, eas], [eas, ea2 + sbar**2 + nu]])
    se = U.std(axis=0) / math.sqrt(N)
    assert np.all(np.abs(U.mean(axis=0) - expected) < 3 * se)


@pytest.mark.parametrize("example", [1, 2, 3, 4, 5, 6])
def test_shapes_and_validity(example):
    data = gen_example(DGPConfig.for_example(example, n_train=60, n_test=40, gamma2=3, gamma3=3, seed=1))
    assert data.train.n == 60 and data.test.n == 40
    assert data.truth.shape == data.test.Y.shape
    objs = [data.train.Y, data.test.Y, data.truth]
    if example in (2, 3, 5, 6):
        objs += [data.train.U, data.test.U]
    for A in objs:
        if A.ndim == 2:
            assert np.all(np.diff(A, axis=1) > 0)
        elif A.ndim == 3:
            assert np.linalg.eigvalsh(A).min() >= -1e-10
            np.testing.assert_array_equal(A, np.swapaxes(A, 1, 2))


def test_deterministic_and_disjoint_streams():
    cfg = DGPConfig.for_example(2, n_train=50, n_test=50, seed=123)
    a, b = gen_example(cfg), gen_example(cfg)
    for x, y in ((a.train.X, b.train.X), (a.train.U, b.train.U), (a.train.Y, b.train.Y), (a.test.Y, b.test.Y)):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a.train.X, a.test.X)
    # the training sample does not depend on the size of the test sample
    c = gen_example(DGPConfig.for_example(2, n_train=50, n_test=7, seed=123))
    np.testing.assert_array_equal(a.train.Y, c.train.Y)
    d = gen_example(DGPConfig.for_example(2, n_train=50, n_test=50, seed=124))
    assert not np.array_equal(a.train.X, d.train.X)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        DGPConfig.for_example(7)
    with pytest.raises(ConfigurationError):
        DGPConfig(example=1, n_train=0)
    assert DGPConfig.for_example(6).beta_u == 4.0
    assert DGPConfig.for_example(3).mu0u == 2.0
    assert DGPConfig.for_example(5).modifier_type == "quantile"


def test_benchmark_threads_and_order_invariant():
    kw = dict(n_train=(40,), methods=("gfr", "vfr"), reps=4, seed=5, n_test=60, cv=CVConfig(k=4))
    a = run_benchmark(1, threads=1, **kw)
    b = run_benchmark(1, threads=3, **kw)
    assert [r["values"] for r in a] == [r["values"] for r in b]
    row = next(r for r in a if r["method"] == "vfr")
    vals = np.array(row["values"])
    assert row["mean_gmse"] == pytest.approx(vals.mean())
    assert row["mean_gmse"] == pytest.approx(vals[::-1].mean())
    assert row["se_gmse"] == pytest.approx(vals.std(ddof=1) / 2)
    assert "VFR" in format_table(a)


def test_benchmark_metric_modifier_marks_inapplicable():
    rows = run_benchmark(3, n_train=(40,), methods=("gfr", "lfr", "vfr"), reps=2, seed=1, n_test=30,
                         cv=CVConfig(k=4))
    by = {r["method"]: r for r in rows}
    assert not by["gfr"]["applicable"] and not by["lfr"]["applicable"]
    assert math.isnan(by["gfr"]["mean_gmse"])
    assert by["vfr"]["applicable"] and np.isfinite(by["vfr"]["mean_gmse"])
    assert "--" in format_table(rows)


def test_benchmark_rejects_unknown_method():
    with pytest.raises(ConfigurationError):
        run_benchmark(1, methods=("knn",), reps=1)


def test_zero_noise_rate_sanity():
    rows = run_benchmark(1, n_train=(50, 100, 200), methods=("vfr",), reps=10, seed=3, n_test=200,
                         against_truth=True, dgp_overrides={"nu1": 1e-8, "nu2": 1e-8})
    means = [r["mean_gmse"] for r in rows]
    assert means[0] > means[1] > means[2]


@pytest.mark.parametrize("example", [1, 3, 4, 6])
def test_empty_test_sample(example):
    data = gen_example(DGPConfig.for_example(example, n_train=10, n_test=0, seed=1))
    assert data.test.n == 0 and data.truth.shape[0] == 0
