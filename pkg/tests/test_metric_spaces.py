import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import norm

import oracles
from frechet_vcm import _accel
from frechet_vcm.errors import (
    DimensionError,
    GridMismatchError,
    InvalidMatrixError,
    InvalidWeightsError,
    ValidationError,
)
from frechet_vcm.metric_spaces import (
    QuantileFunction,
    QuantileSpace,
    ScalarSpace,
    SPDPoint,
    SPDSpace,
    cholesky_sq_distance,
    isotonic_projection,
    matrix_sqrt,
    quantile_grid,
    quantile_weighted_mean,
    scalar_weighted_mean,
    space_from_name,
    spd_weighted_mean,
    wasserstein_sq_distance,
)

finite = st.floats(-50, 50, allow_nan=False)


def sorted_rows(n, m):
    return arrays(np.float64, (n, m), elements=finite).map(lambda a: np.sort(a, axis=1))


def random_spd(rng, k, M=2):
    A = rng.standard_normal((k, M, M))
    return A @ np.swapaxes(A, 1, 2) + 0.05 * np.eye(M)


@st.composite
def spd_stack(draw, k=None, M=2):
    k = k or draw(st.integers(1, 4))
    A = draw(arrays(np.float64, (k, M, M), elements=st.floats(-3, 3)))
    return A @ np.swapaxes(A, 1, 2)


# --------------------------------------------------------------------------
# grid and points


def test_quantile_grid():
    np.testing.assert_allclose(quantile_grid(4), [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(ValueError):
        quantile_grid(0)


def test_quantile_function_validation():
    QuantileFunction([1.0, 1.0, 2.0])
    with pytest.raises(ValidationError):
        QuantileFunction([1.0, 0.5])
    with pytest.raises(ValidationError):
        QuantileFunction([0.0, np.nan])


def test_spd_point_validation():
    with pytest.raises(InvalidMatrixError):
        SPDPoint([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InvalidMatrixError):
        SPDPoint([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(InvalidMatrixError):
        SPDPoint([1.0, 2.0])


# --------------------------------------------------------------------------
# PAVA


def test_pava_example():
    np.testing.assert_array_equal(isotonic_projection([0.0, 2.0, 1.0, 3.0]), [0.0, 1.5, 1.5, 3.0])
    assert [float(v) for v in oracles.isotonic_exhaustive([0, 2, 1, 3])] == [0.0, 1.5, 1.5, 3.0]


def test_pava_matches_exhaustive_oracle(rng):
    checked = 0
    while checked < 100:
        n = int(rng.integers(2, 9))
        y = rng.normal(size=n)
        if np.all(np.diff(y) >= 0):
            continue
        expected = np.array([float(v) for v in oracles.isotonic_exhaustive(y)])
        got = isotonic_projection(y)
        assert np.max(np.abs(got - expected)) <= 1e-12
        # integer data: block means are exact in both, so the match is exact
        yi = rng.integers(-20, 20, n).astype(float)
        np.testing.assert_array_equal(
            isotonic_projection(yi), [float(v) for v in oracles.isotonic_exhaustive(yi)]
        )
        checked += 1


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 12)), elements=finite))
def test_pava_properties(raw):
    out = isotonic_projection(raw)
    assert np.all(np.diff(out, axis=1) >= 0)
    # idempotent, and a projection: residual orthogonal to the solution
    np.testing.assert_array_equal(isotonic_projection(out), out)
    np.testing.assert_allclose(np.sum((raw - out) * out, axis=1), 0.0, atol=1e-8 * (1 + np.abs(raw).max() ** 2))
    # block means preserve the row sums
    np.testing.assert_allclose(out.sum(axis=1), raw.sum(axis=1), atol=1e-9 * (1 + np.abs(raw).sum()))


@pytest.mark.skipif(not _accel.COMPILED_AVAILABLE, reason="compiled backend not built")
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 15)), elements=finite))
def test_backends_agree(raw):
    a = _accel.pava_rows_python(raw)
    b = _accel.pava_rows_compiled(raw)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12 * (1 + np.abs(raw).max()))


# --------------------------------------------------------------------------
# distances


def test_wasserstein_location_shift():
    a = norm.ppf(quantile_grid(20))
    assert wasserstein_sq_distance(a, a + 2.5) == pytest.approx(6.25, rel=1e-14)


def test_wasserstein_normal_pair():
    t = quantile_grid(20)
    a = norm.ppf(t)
    b = 1 + 2 * norm.ppf(t)
    expected = mp.fsum((1 + mp.sqrt(2) * mp.erfinv(2 * mp.mpf(ti) - 1)) ** 2 for ti in t) / 20
    assert wasserstein_sq_distance(a, b) == pytest.approx(float(expected), rel=1e-12)


def test_wasserstein_grid_mismatch():
    with pytest.raises(GridMismatchError):
        wasserstein_sq_distance(np.zeros(3), np.zeros(4))


def test_matrix_sqrt_example():
    P = np.array([[2.0, 1.0], [1.0, 2.0]])
    V = np.array([[1.0, 1.0], [-1.0, 1.0]]) / np.sqrt(2)
    expected = V @ np.diag([1.0, np.sqrt(3.0)]) @ V.T
    R = matrix_sqrt(P)
    np.testing.assert_allclose(R, expected, atol=1e-14)
    np.testing.assert_allclose(R @ R, P, atol=1e-14)


def test_matrix_sqrt_vs_mpmath(rng):
    for P in random_spd(rng, 5, 3):
        R = np.array(mp.sqrtm(mp.matrix(P.tolist())).tolist(), dtype=float)
        np.testing.assert_allclose(matrix_sqrt(P), R, atol=1e-12)


def test_cholesky_distance_examples(rng):
    assert cholesky_sq_distance(np.eye(2), 4 * np.eye(2)) == pytest.approx(2.0)
    A, B = random_spd(rng, 2, 3)
    ra = np.array(mp.sqrtm(mp.matrix(A.tolist())).tolist(), dtype=float)
    rb = np.array(mp.sqrtm(mp.matrix(B.tolist())).tolist(), dtype=float)
    assert cholesky_sq_distance(A, B) == pytest.approx(float(np.sum((ra - rb) ** 2)), rel=1e-10)


def test_cholesky_dimension_mismatch():
    with pytest.raises(DimensionError):
        cholesky_sq_distance(np.eye(2), np.eye(3))


@given(sorted_rows(3, 6))
def test_wasserstein_triangle(Q):
    d = lambda a, b: np.sqrt(wasserstein_sq_distance(a, b))  # noqa: E731
    assert d(Q[0], Q[2]) <= d(Q[0], Q[1]) + d(Q[1], Q[2]) + 1e-9


@given(spd_stack(k=3))
def test_cholesky_triangle(P):
    d = lambda a, b: np.sqrt(cholesky_sq_distance(a, b))  # noqa: E731
    assert d(P[0], P[2]) <= d(P[0], P[1]) + d(P[1], P[2]) + 1e-9


@given(spd_stack(k=2))
def test_space_distance_matches_primitive(P):
    assert SPDSpace(2).squared_distance(P[0], P[1]) == pytest.approx(cholesky_sq_distance(P[0], P[1]),
                                                                     rel=1e-12, abs=1e-12)


# --------------------------------------------------------------------------
# weighted Frechet means


def test_scalar_mean_example():
    assert float(scalar_weighted_mean([1.0, 2.0, 3.0], [-0.5, 1.0, 0.5])) == pytest.approx(3.0)


def test_weights_must_sum_to_one():
    with pytest.raises(InvalidWeightsError):
        scalar_weighted_mean([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(InvalidWeightsError):
        scalar_weighted_mean([1.0, 2.0], [0.5])
    with pytest.raises(InvalidWeightsError):
        scalar_weighted_mean([1.0, 2.0], [np.nan, 1.0])


def test_spd_mean_examples():
    I = np.eye(2)
    np.testing.assert_allclose(spd_weighted_mean([I, 4 * I], [0.5, 0.5]).matrix, 2.25 * I, atol=1e-14)
    # extrapolating weights: 1.5 * I - 0.5 * 2I = 0.5 I, squared 0.25 I
    np.testing.assert_allclose(spd_weighted_mean([I, 4 * I], [1.5, -0.5]).matrix, 0.25 * I, atol=1e-14)
    # a negative combination of roots gets clipped to zero
    np.testing.assert_allclose(spd_weighted_mean([I, 4 * I], [2.0, -1.0]).matrix, 0 * I, atol=1e-14)


def test_quantile_mean_projects():
    Y = [[0.0, 1.0, 2.0], [0.0, 3.0, 3.0]]
    # raw average 2*Y1 - Y2 = [0, -1, 1] is not monotone
    q = quantile_weighted_mean(Y, [2.0, -1.0])
    np.testing.assert_allclose(q.values, [-0.5, -0.5, 1.0])


def test_quantile_mean_brute_force(rng):
    values = np.round(np.arange(-3.0, 3.0001, 0.25), 10)
    step = values[1] - values[0]
    for trial in range(12):
        n, m = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        Y = np.sort(rng.uniform(-2, 2, (n, m)), axis=1)
        w = rng.normal(size=n)
        w = w / w.sum() if abs(w.sum()) > 0.3 else np.full(n, 1.0 / n) + np.r_[1.0, -1.0, [0.0] * (n - 2)]
        q = quantile_weighted_mean(Y, w).values
        obj = lambda v: float(np.sum(w * np.mean((Y - v) ** 2, axis=1)))  # noqa: E731
        best, best_obj = oracles.monotone_grid_minimiser(Y, w, values)
        if np.all((q >= values[0]) & (q <= values[-1])):
            # exact minimiser is at least as good as every grid candidate
            assert obj(q) <= best_obj + 1e-12
            # and the grid argmin lies within the grid resolution of it
            assert np.max(np.abs(q - best)) <= step
        assert np.all(np.diff(q) >= 0)


def test_spd_mean_brute_force(rng):
    step = 0.05
    for trial in range(8):
        n = int(rng.integers(2, 5))
        P = random_spd(rng, n) * 0.5
        w = rng.normal(size=n)
        w = w / w.sum() if abs(w.sum()) > 0.3 else np.r_[1.5, -0.5, [0.0] * (n - 2)]
        Y = spd_weighted_mean(P, w)
        R = matrix_sqrt(Y.matrix)
        obj = lambda S: float(sum(wj * np.sum((oracles.spd_root(p) - S) ** 2) for wj, p in zip(w, P)))  # noqa: E731
        best, best_obj = oracles.spd_grid_minimiser(P, w, step)
        assert obj(R) <= best_obj + 1e-10
        assert np.max(np.abs(R - best)) <= 2 * step


@given(sorted_rows(4, 6), st.lists(st.floats(0.01, 1.0), min_size=4, max_size=4))
def test_nonnegative_weights_no_projection(Y, w):
    w = np.array(w) / np.sum(w)
    q = quantile_weighted_mean(Y, w).values
    np.testing.assert_allclose(q, w @ Y, rtol=0, atol=1e-12 * (1 + np.abs(Y).max()))


@given(sorted_rows(3, 5), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_quantile_mean_always_monotone(Y, w):
    w = np.array([w[0], w[1], 1.0 - w[0] - w[1]])
    assert np.all(np.diff(quantile_weighted_mean(Y, w).values) >= 0)


@given(spd_stack(k=3), st.lists(st.floats(-2, 2), min_size=2, max_size=2), st.data())
def test_spd_mean_properties(P, w, data):
    w = np.array([w[0], w[1], 1.0 - w[0] - w[1]])
    Y = spd_weighted_mean(P, w)
    assert np.linalg.eigvalsh(Y.matrix).min() >= -1e-10 * max(1.0, np.abs(Y.matrix).max())
    R = matrix_sqrt(Y.matrix)
    np.testing.assert_allclose(R @ R, Y.matrix, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(Y.matrix).max()))
    # local optimality against random PSD candidates when the raw mean is PSD
    roots = np.array([oracles.spd_root(p) for p in P])
    Rbar = np.tensordot(w, roots, axes=1)
    if np.linalg.eigvalsh(Rbar).min() >= 0:
        obj = lambda S: float(sum(wj * np.sum((r - S) ** 2) for wj, r in zip(w, roots)))  # noqa: E731
        seed = data.draw(st.integers(0, 2**32 - 1))
        cand = random_spd(np.random.default_rng(seed), 20)
        base = obj(R)
        for C in cand:
            assert base <= obj(oracles.spd_root(C)) + 1e-9 * (1 + abs(base))


@given(spd_stack(k=4))
def test_spd_mean_positive_weights_is_psd(P):
    Y = SPDSpace(2).weighted_frechet_mean(P, np.full(4, 0.25))
    assert np.linalg.eigvalsh(Y.matrix).min() >= -1e-10 * max(1.0, np.abs(Y.matrix).max())


# --------------------------------------------------------------------------
# space objects


def test_space_from_name():
    assert space_from_name("scalar") == ScalarSpace()
    assert space_from_name("quantile", m=7) == QuantileSpace(7)
    assert space_from_name("spd", M=3) == SPDSpace(3)
    with pytest.raises(ValidationError):
        space_from_name("sphere")


def test_batched_means_match_single(rng):
    space = QuantileSpace(5)
    Y = np.sort(rng.normal(size=(6, 5)), axis=1)
    W = rng.normal(size=(4, 6))
    W[:, -1] = 1 - W[:, :-1].sum(axis=1)
    batched = space.frechet_means(W, Y)
    for row, w in zip(batched, W):
        np.testing.assert_allclose(row, quantile_weighted_mean(Y, w).values, atol=1e-13)


def test_quantile_space_rejects_decreasing():
    with pytest.raises(ValidationError):
        QuantileSpace(3).validate([[0.0, 2.0, 1.0]])
    with pytest.raises(GridMismatchError):
        QuantileSpace(3).validate([[0.0, 1.0]])


def test_pairwise_distances_match_pointwise(rng):
    space = SPDSpace(2)
    P = random_spd(rng, 5)
    D = space.pairwise_distances(P)
    for i in range(5):
        for j in range(5):
            assert D[i, j] == pytest.approx(np.sqrt(cholesky_sq_distance(P[i], P[j])), abs=1e-12)
