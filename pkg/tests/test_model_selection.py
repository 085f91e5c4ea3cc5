import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frechet_vcm.errors import ConfigurationError, NoFeasibleBandwidthError
from frechet_vcm.kernels import WeightKind, WeightScheme
from frechet_vcm.metric_spaces import QuantileSpace, ScalarSpace, wasserstein_sq_distance
from frechet_vcm.model_selection import (
    CVConfig,
    fit_method,
    fold_assignment,
    gmse,
    modifier_distance_scale,
    select_bandwidth,
)
from frechet_vcm.training import TrainingSet
from frechet_vcm.vfr import euclidean_vcm_predict


def scalar_data(rng, n=60):
    X = rng.standard_normal((n, 2))
    U = rng.uniform(0, 1, n)
    Y = np.sin(2 * np.pi * U) + X[:, 0] * U + 0.2 * rng.standard_normal(n)
    return TrainingSet(X, U, Y, ScalarSpace())


def test_gmse_scalar_examples(rng):
    t = scalar_data(rng)
    model = fit_method("gfr", t)
    pred = model.predict_batch(t.X, t.U)
    perfect = TrainingSet(t.X, t.U, pred, ScalarSpace(), check_size=False)
    assert gmse(model, perfect) == 0.0
    shifted = TrainingSet(t.X, t.U, pred + 2.0, ScalarSpace(), check_size=False)
    assert gmse(model, shifted) == pytest.approx(4.0)


def test_gmse_quantile_oracle(rng):
    n, m = 30, 5
    X = rng.standard_normal((n, 1))
    U = rng.uniform(0, 1, n)
    Y = np.sort(rng.standard_normal((n, m)), axis=1) + X
    t = TrainingSet(X, U, Y, QuantileSpace(m))
    model = fit_method("vfr", t, 0.3)
    test = t.subset([0, 5, 9], check_size=False)
    expected = np.mean([wasserstein_sq_distance(model.predict(test.X[i], test.U[i]), test.Y[i])
                        for i in range(3)])
    assert gmse(model, test) == pytest.approx(expected, rel=1e-12)


def test_gmse_space_mismatch(rng):
    t = scalar_data(rng)
    other = TrainingSet(t.X[:3], t.U[:3], np.zeros((3, 4)), QuantileSpace(4), check_size=False)
    with pytest.raises(ConfigurationError):
        gmse(fit_method("gfr", t), other)


@given(seed=st.integers(0, 2**32 - 1))
def test_gmse_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    t = scalar_data(rng, n=30)
    model = fit_method("vfr", t, 0.25)
    perm = rng.permutation(t.n)
    a = gmse(model, t)
    b = gmse(model, t.subset(perm))
    assert a == pytest.approx(b, rel=1e-12)


def test_fold_assignment_balanced():
    f = fold_assignment(23, 5, 1)
    counts = np.bincount(f)
    assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(f, fold_assignment(23, 5, 1))
    with pytest.raises(ConfigurationError):
        fold_assignment(3, 5, 0)


def test_cv_config_validation():
    with pytest.raises(ConfigurationError):
        CVConfig(grid=())
    with pytest.raises(ConfigurationError):
        CVConfig(grid=(0.2, 0.1))
    with pytest.raises(ConfigurationError):
        CVConfig(grid=(0.0, 0.1))
    with pytest.raises(ConfigurationError):
        CVConfig(k=1)


def test_cv_matches_exhaustive_recomputation(rng):
    t = scalar_data(rng)
    cfg = CVConfig(grid=(0.05, 0.1, 0.2, 0.3), k=5, seed=3)
    res = select_bandwidth(t, "vfr", "local_constant", cfg)
    folds = fold_assignment(t.n, 5, 3)
    errors = []
    for h in cfg.grid:
        scheme = WeightScheme(WeightKind.LOCAL_CONSTANT, h)
        per_fold = []
        for f in range(5):
            train = t.subset(np.flatnonzero(folds != f))
            held = np.flatnonzero(folds == f)
            sq = [(float(euclidean_vcm_predict(train, t.X[i], t.U[i], scheme)) - t.Y[i]) ** 2 for i in held]
            per_fold.append(np.mean(sq))
        errors.append(np.mean(per_fold))
    np.testing.assert_allclose(res.errors, errors, rtol=1e-9)
    assert res.bandwidth == cfg.grid[int(np.argmin(errors))]
    assert res.best_error == min(res.errors)
    assert np.all(res.errors >= 0)


def test_cv_deterministic(rng):
    t = scalar_data(rng)
    cfg = CVConfig(k=4, seed=11)
    a = select_bandwidth(t, "pfr", None, cfg)
    b = select_bandwidth(t, "pfr", None, cfg, threads=3)
    np.testing.assert_array_equal(a.errors, b.errors)
    assert a.bandwidth == b.bandwidth


def test_degenerate_bandwidth_disqualified(rng):
    t = scalar_data(rng, n=40)
    res = select_bandwidth(t, "vfr", None, CVConfig(grid=(1e-6, 0.2), k=5))
    assert math.isinf(res.errors[0]) and res.failures[0] > 0
    assert res.bandwidth == 0.2


def test_all_degenerate_raises(rng):
    t = scalar_data(rng, n=40)
    with pytest.raises(NoFeasibleBandwidthError):
        select_bandwidth(t, "vfr", None, CVConfig(grid=(1e-7, 1e-6), k=5))


def test_single_grid_point(rng):
    t = scalar_data(rng, n=30)
    assert select_bandwidth(t, "vfr", None, CVConfig(grid=(0.17,), k=3)).bandwidth == 0.17


def test_ties_go_to_smaller_bandwidth(rng):
    n = 30
    t = TrainingSet(rng.standard_normal((n, 1)), rng.uniform(0, 1, n), np.zeros(n), ScalarSpace())
    res = select_bandwidth(t, "vfr", None, CVConfig(grid=(0.1, 0.2, 0.3), k=3))
    np.testing.assert_array_equal(res.errors, 0.0)
    assert res.bandwidth == 0.1


def test_fit_method_dispatch(rng):
    t = scalar_data(rng)
    assert fit_method("VFR", t, 0.2).method == "vfr"
    assert fit_method("vfr", t, 0.2, "linear").scheme.kind is WeightKind.LOCAL_LINEAR
    assert fit_method("lfr", t, 0.2, lfr_order=0).order == 0
    with pytest.raises(ConfigurationError):
        fit_method("vfr", t)
    with pytest.raises(ConfigurationError):
        fit_method("knn", t, 0.2)
    with pytest.raises(ConfigurationError):
        fit_method("vfr", t, 0.2, "metric_ball")


def test_modifier_distance_scale_uniform(rng):
    n = 400
    t = TrainingSet(rng.standard_normal((n, 1)), rng.uniform(0, 1, n), np.zeros(n), ScalarSpace())
    assert modifier_distance_scale(t) == pytest.approx(1.0, abs=0.1)
    t10 = TrainingSet(t.X, 10 * t.U, t.Y, ScalarSpace())
    assert modifier_distance_scale(t10) == pytest.approx(10 * modifier_distance_scale(t), rel=1e-12)
