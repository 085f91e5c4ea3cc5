"""Simulation designs (Examples 1-6) and the Monte-Carlo benchmark runner.

Examples 1-3 have distributional responses (quantile functions), Examples
4-6 have 2x2 SPD responses.  The effect modifier is the scalar ``T`` in
Examples 1 and 4, a random distribution driven by ``T`` in Examples 2 and 5
and a random SPD matrix driven by ``T`` in Examples 3 and 6.

Gamma draws use the (shape, scale) convention so that a draw with
parameters ``(s**2 / nu, nu / s)`` has mean ``s`` and variance ``nu``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .errors import ConfigurationError, NumericalError, UnsupportedModifierError
from .metric_spaces import QuantileSpace, ScalarSpace, SPDSpace, quantile_grid
from .model_selection import (
    METHODS,
    CVConfig,
    fit_method,
    modifier_distance_scale,
    select_bandwidth,
)
from .training import TrainingSet

__all__ = [
    "DGPConfig",
    "SimulatedDataset",
    "gen_predictors",
    "gen_example",
    "run_benchmark",
    "format_table",
    "RESULT_COLUMNS",
    "SIGMA_FLOOR",
]

SIGMA_FLOOR = 1e-3
# smallest admissible Gamma draw; keeps simulated quantile functions strictly increasing
DRAW_FLOOR = 1e-12
RESULT_COLUMNS = ("example", "method", "n", "gamma2", "gamma3", "reps", "mean_gmse", "se_gmse", "failures")

_PER_EXAMPLE = {
    1: {},
    2: {"mu0u": 0.0, "nu_u": 1.0, "gamma_u": 3.0, "sigma0u": 2.0},
    3: {"mu0u": 2.0, "nu_u": 1.0, "gamma_u": 3.0, "sigma0u": 2.0, "beta_u": 1.0},
    4: {},
    5: {"mu0u": 0.0, "nu_u": 1.0, "gamma_u": 3.0, "sigma0u": 2.0},
    6: {"mu0u": 2.0, "sigma0u": 2.0, "gamma_u": 4.0, "beta_u": 4.0, "nu_u1": 1.0, "nu_u2": 1.0},
}


@dataclass(frozen=True)
class DGPConfig:
    example: int
    n_train: int = 200
    n_test: int = 1000
    gamma2: float = 1.0
    gamma3: float = 1.0
    seed: int = 0
    m: int = 20
    mu0: float = 1.0
    gamma1: float = 2.0
    sigma0: float = 2.0
    nu1: float = 1.0
    nu2: float = 2.0
    # modifier parameters; defaults depend on the example
    mu0u: float = 0.0
    nu_u: float = 1.0
    gamma_u: float = 3.0
    sigma0u: float = 2.0
    beta_u: float = 1.0
    nu_u1: float = 1.0
    nu_u2: float = 1.0
    M: int = 2
    N: int = 10

    def __post_init__(self):
        if self.example not in _PER_EXAMPLE:
            raise ConfigurationError(f"example must be 1..6, got {self.example}")
        if self.n_train < 1 or self.n_test < 0:
            raise ConfigurationError("sample sizes must be positive")

    @classmethod
    def for_example(cls, example: int, **kwargs) -> "DGPConfig":
        """Config with the example's fixed constants, then ``kwargs`` on top."""
        if example not in _PER_EXAMPLE:
            raise ConfigurationError(f"example must be 1..6, got {example}")
        return cls(example=example, **{**_PER_EXAMPLE[example], **kwargs})

    @property
    def response_type(self) -> str:
        return "quantile" if self.example <= 3 else "spd"

    @property
    def modifier_type(self) -> str:
        return {1: "scalar", 2: "quantile", 3: "spd"}[(self.example - 1) % 3 + 1]


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    train: TrainingSet
    test: TrainingSet
    truth: np.ndarray | None = field(default=None, repr=False)
    config: DGPConfig | None = None


_COV = 0.5 ** np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
_CHOL = np.linalg.cholesky(_COV)


def gen_predictors(n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """``S ~ N_4(0, 0.5^|j-j'|)`` and ``T = Phi(S_4)``.

    ``seed`` is an int, a SeedSequence or a Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    S = rng.standard_normal((n, 4)) @ _CHOL.T
    return S, norm.cdf(S[:, 3])


def _gamma_mean(rng, s: np.ndarray, nu: float) -> np.ndarray:
    return np.maximum(rng.gamma(shape=s * s / nu, scale=nu / s), DRAW_FLOOR)


def _upper(M: int) -> np.ndarray:
    return np.triu(np.ones((M, M)), k=1)


def _wishart_noise(rng, n: int, M: int, N: int) -> np.ndarray:
    Z = rng.standard_normal((n, N, M))
    return np.einsum("nkm,nkl->nml", Z, Z) / N


def _sandwich(diag: np.ndarray, off: np.ndarray, M: int, noise: np.ndarray | None = None) -> np.ndarray:
    """``B^T W B`` with ``B = diag * I + off * V``; ``W = I`` when noise is None."""
    I, V = np.eye(M), _upper(M)
    B = diag[:, None, None] * I + off[:, None, None] * V
    Bt = np.swapaxes(B, 1, 2)
    P = Bt @ B if noise is None else Bt @ noise @ B
    # exact symmetry; the products above can differ from it by an ulp
    return 0.5 * (P + np.swapaxes(P, 1, 2))


def _modifier(cfg: DGPConfig, T: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Effect modifier driven by ``T``: ``T`` itself, a distribution or an SPD matrix."""
    kind = (cfg.example - 1) % 3 + 1
    if kind == 1:
        return T
    if kind == 2:
        su = _gamma_mean(rng, cfg.sigma0u + cfg.gamma_u * T, cfg.nu_u)
        return cfg.mu0u + su[:, None] * norm.ppf(quantile_grid(cfg.m))[None, :]
    if cfg.example == 6:
        mu_u = rng.normal(cfg.mu0u + cfg.beta_u * T, np.sqrt(cfg.nu_u1))
        su = _gamma_mean(rng, cfg.sigma0u + cfg.gamma_u * T, cfg.nu_u2)
    else:
        mu_u = cfg.mu0u + cfg.beta_u * T
        su = _gamma_mean(rng, cfg.sigma0u + cfg.gamma_u * T, cfg.nu_u)
    return _sandwich(mu_u + su, su, cfg.M, _wishart_noise(rng, len(T), cfg.M, cfg.N))


def _response(cfg: DGPConfig, X: np.ndarray, T: np.ndarray, rng: np.random.Generator):
    """Random responses at ``(X, T)`` and the noiseless regression values."""
    grid_q = norm.ppf(quantile_grid(cfg.m))
    mean_mu = cfg.mu0 + cfg.gamma1 * T * X[:, 0] + cfg.gamma2 * T**2 * X[:, 1]
    s = np.maximum(cfg.sigma0 + cfg.gamma3 * np.sin(np.pi * T) * X[:, 2], SIGMA_FLOOR)
    mu = rng.normal(mean_mu, np.sqrt(cfg.nu1))
    sigma = _gamma_mean(rng, s, cfg.nu2)
    if cfg.example <= 3:
        Y = mu[:, None] + sigma[:, None] * grid_q[None, :]
        truth = mean_mu[:, None] + s[:, None] * grid_q[None, :]
    else:
        Y = _sandwich(mu + sigma, sigma, cfg.M, _wishart_noise(rng, len(T), cfg.M, cfg.N))
        truth = _sandwich(mean_mu + s, s, cfg.M)
    return Y, truth


def _draw(cfg: DGPConfig, n: int, rng: np.random.Generator):
    S, T = gen_predictors(n, rng)
    X = S[:, :3]
    U = _modifier(cfg, T, rng)
    Y, truth = _response(cfg, X, T, rng)
    return X, U, Y, truth


def _spaces(cfg: DGPConfig):
    response = QuantileSpace(cfg.m) if cfg.example <= 3 else SPDSpace(cfg.M)
    modifier = {"scalar": ScalarSpace(), "quantile": QuantileSpace(cfg.m), "spd": SPDSpace(cfg.M)}[cfg.modifier_type]
    return response, modifier


def gen_example(config: DGPConfig) -> SimulatedDataset:
    """Independent training and test samples from one example's design.

    ``truth`` holds the noiseless regression function at the test points.
    """
    train_ss, test_ss = np.random.SeedSequence(config.seed).spawn(2)
    response, modifier = _spaces(config)
    X, U, Y, _ = _draw(config, config.n_train, np.random.default_rng(train_ss))
    train = TrainingSet(X, U, Y, response, modifier)
    Xt, Ut, Yt, truth = _draw(config, config.n_test, np.random.default_rng(test_ss))
    test = TrainingSet(Xt, Ut, Yt, response, modifier, check_size=False)
    return SimulatedDataset(train, test, truth, config)


# --------------------------------------------------------------------------
# benchmark


def _one_replication(example, n, rep, gammas, methods, seed, n_test, cv, weights, scale_grid,
                     against_truth, dgp_overrides):
    ss = np.random.SeedSequence([seed, n, rep])
    data_seed, cv_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    cfg = DGPConfig.for_example(example, n_train=n, n_test=n_test, gamma2=gammas[0], gamma3=gammas[1],
                                seed=data_seed, **dgp_overrides)
    data = gen_example(cfg)
    train, test = data.train, data.test
    if against_truth:
        test = TrainingSet(test.X, test.U, data.truth, test.response_space, test.modifier_space, check_size=False)
    fold_cfg = replace(cv, seed=cv_seed)
    scale_needed = scale_grid if scale_grid is not None else not train.scalar_modifier
    if scale_needed:
        fold_cfg = fold_cfg.scaled(modifier_distance_scale(train))
    out = {}
    for method in methods:
        try:
            if method == "gfr":
                model = fit_method("gfr", train)
            else:
                h = select_bandwidth(train, method, weights, fold_cfg).bandwidth
                model = fit_method(method, train, h, weights)
            pred = model.predict_batch(test.X, test.U)
            out[method] = float(np.mean(test.response_space.sq_distances(pred, test.Y)))
        except UnsupportedModifierError:
            out[method] = None
        except NumericalError:
            out[method] = math.nan
    return out


def run_benchmark(
    example: int,
    n_train=(50, 100, 200),
    gammas=(1.0, 1.0),
    methods=METHODS,
    reps: int = 50,
    seed: int = 0,
    n_test: int = 1000,
    cv: CVConfig = CVConfig(),
    weights=None,
    threads: int = 1,
    scale_grid: bool | None = None,
    against_truth: bool = False,
    dgp_overrides: dict | None = None,
    progress=None,
) -> list[dict]:
    """Average GMSE per (method, n) over ``reps`` fresh replications.

    Bandwidths are chosen per method and per replication by k-fold CV.  For
    metric modifiers the grid is multiplied by the standard deviation of
    the pairwise modifier distances unless ``scale_grid`` says otherwise.
    Methods that cannot handle the modifier yield a row with NaN values;
    replications where a method fails numerically are excluded and counted.
    """
    methods = [m.lower() for m in methods]
    for m in methods:
        if m not in METHODS:
            raise ConfigurationError(f"unknown method {m!r}")
    if reps < 1:
        raise ConfigurationError("reps must be positive")
    DGPConfig.for_example(example)
    overrides = dict(dgp_overrides or {})
    rows = []
    for n in n_train:
        def job(rep, n=n):
            res = _one_replication(example, n, rep, gammas, methods, seed, n_test, cv, weights,
                                   scale_grid, against_truth, overrides)
            if progress is not None:
                progress(n, rep)
            return res

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(job, range(reps)))
        else:
            results = [job(r) for r in range(reps)]
        for method in methods:
            vals = [r[method] for r in results]
            row = {"example": example, "method": method, "n": n, "gamma2": gammas[0],
                   "gamma3": gammas[1], "reps": reps}
            if all(v is None for v in vals):
                row.update(mean_gmse=math.nan, se_gmse=math.nan, failures=0, applicable=False)
            else:
                ok = np.array([v for v in vals if v is not None and np.isfinite(v)])
                fails = reps - ok.size
                mean = float(ok.mean()) if ok.size else math.nan
                se = float(ok.std(ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else math.nan
                row.update(mean_gmse=mean, se_gmse=se, failures=fails, applicable=True)
            row["values"] = vals
            rows.append(row)
    return rows


def format_table(rows: list[dict]) -> str:
    """Aligned text rendering: one line per n, one column per method."""
    methods = list(dict.fromkeys(r["method"] for r in rows))
    ns = list(dict.fromkeys(r["n"] for r in rows))
    cell = {(r["method"], r["n"]): r for r in rows}
    head = f"{'n':>6}" + "".join(f"{m.upper():>20}" for m in methods)
    lines = [head]
    for n in ns:
        parts = [f"{n:>6}"]
        for m in methods:
            r = cell.get((m, n))
            if r is None or not r.get("applicable", True):
                parts.append(f"{'--':>20}")
            else:
                parts.append(f"{r['mean_gmse']:>11.3f} ({r['se_gmse']:.3f})".rjust(20))
        lines.append("".join(parts))
    return "\n".join(lines)
