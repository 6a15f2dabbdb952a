"""Benchmark functions and experiment runners.

Three desk-scale experiments quantify how additive kernels behave as the
dimension grows:

* p-collapse: the variance-based predictivity P of a separable-kernel
  model on Latin hypercube designs of size 10*d, as d grows with the
  range held fixed (and, for contrast, scaled like sqrt(d));
* add-vs-sep: for a process that is the sum of independent additive and
  separable components, the analytic predictivity of the additive and
  separable parts of the combined predictor;
* gfun-q2: held-out Q2 of additive vs separable Matern 5/2 models fitted
  by maximum likelihood to the Sobol g-function, with the coefficient a1
  chosen so the first-order indices sum to a prescribed fraction.

P is computed as the fraction of prior variance resolved by the model,
P = 1 - sum_t v(x_t) / sum_t K(x_t, x_t), so P = 1 means the process is
determined by the observations at the design and P = 0 means nothing
was learned.

Every record derives its own seed from the root seed and its cell
indices, so runs are reproducible cell by cell and independent of how
work is scheduled across workers.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import bisect

from . import __version__ as _version
from .design import RNG_ALGORITHM, Design, DesignKind, DoeConfig, generate
from .kernels import KernelFamily, KernelSpec, cross_cov, gram_matrix
from .kriging import NumericalError, OrdinaryTrend, SingularDesignError, cholesky_with_jitter, fit
from .likelihood import FitConfig, FitError, mle_fit
from .submodels import centered_submodel

__all__ = [
    "GFunction",
    "solve_a1",
    "p_criterion",
    "q2",
    "ExperimentRecord",
    "derive_seed",
    "run_p_collapse",
    "run_add_vs_sep",
    "run_gfun_benchmark",
    "EffectOverlay",
    "main_effect_overlay",
    "save_records",
    "fig_p_collapse",
    "fig_add_vs_sep",
    "fig_q2_quartiles",
    "save_fig_csv",
]


@dataclass(frozen=True)
class GFunction:
    """The Sobol g-function g(x) = prod_k (|4 x_k - 2| + a_k) / (1 + a_k).

    Coefficients a_k > 0 set how active each input is: the first-order
    index of coordinate k decays like 1 / (1 + a_k)^2.
    """

    a: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float)).copy()
        if a.ndim != 1 or a.size == 0:
            raise ValueError("a must be a nonempty vector")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValueError("all g-function coefficients must be finite and > 0")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.a.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.dim:
            raise ValueError(f"points must have {self.dim} coordinates, got {X.shape[1]}")
        if not np.all(np.isfinite(X)) or np.any(X < 0) or np.any(X > 1):
            raise ValueError("g-function arguments must lie in [0, 1]")
        vals = np.prod((np.abs(4.0 * X - 2.0) + self.a) / (1.0 + self.a), axis=1)
        return float(vals[0]) if single else vals

    def sobol_index(self, i: int) -> float:
        """First-order Sobol index of coordinate ``i``."""
        if not 0 <= i < self.dim:
            raise ValueError(f"i must be in [0, {self.dim}), got {i}")
        u = 1.0 / (3.0 * (1.0 + self.a) ** 2)
        return float(u[i] / (np.prod(1.0 + u) - 1.0))

    def main_effect(self, i: int, x_i):
        """Centered conditional expectation E[g | x_i] - E[g].

        Since E|4 X - 2| = 1 for X uniform, the off-i factors integrate
        to one and the effect is (|4 x_i - 2| + a_i) / (1 + a_i) - 1.
        """
        if not 0 <= i < self.dim:
            raise ValueError(f"i must be in [0, {self.dim}), got {i}")
        x_i = np.asarray(x_i, dtype=float)
        if not np.all(np.isfinite(x_i)) or np.any(x_i < 0) or np.any(x_i > 1):
            raise ValueError("abscissae must lie in [0, 1]")
        out = (np.abs(4.0 * x_i - 2.0) + self.a[i]) / (1.0 + self.a[i]) - 1.0
        return float(out) if out.ndim == 0 else out


def solve_a1(d: int, target: float) -> float:
    """Common coefficient a1 making the first-order indices sum to ``target``.

    With a_k = a1 for all k, the sum of indices is d*u / ((1+u)^d - 1)
    where u = 1 / (3 (1+a1)^2); that expression decreases from 1 to 0 as
    u grows, so it is solved for u by bisection and mapped back to a1.
    """
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if not 0.0 < target < 1.0:
        raise ValueError(f"target must lie in (0, 1), got {target}")

    def h(u: float) -> float:
        # (1+u)^d - 1 via expm1 so tiny u does not cancel to zero
        return d * u / np.expm1(d * np.log1p(u)) - target

    lo = 1e-16
    hi = 1.0
    while h(hi) > 0.0:
        hi *= 10.0
        if hi > 1e12:
            raise ValueError(f"could not bracket a solution for target {target}")
    u = bisect(h, lo, hi, xtol=1e-300, rtol=8.9e-16, maxiter=300)
    a1 = np.sqrt(1.0 / (3.0 * u)) - 1.0
    if a1 <= 0.0:
        raise ValueError(
            f"target {target} needs a1 <= 0 at d={d}; no valid g-function exists"
        )
    return float(a1)


def p_criterion(spec: KernelSpec, design, test_points) -> float:
    """Fraction of prior variance at the test points resolved by the design.

    Uses the simple-kriging posterior variance, which depends on the
    design and kernel only.  Equals 1 when every test point is a design
    point (noise-free) and tends to 0 as the design stops constraining
    the process at the test points.
    """
    test = np.asarray(test_points, dtype=float)
    if test.ndim != 2 or test.shape[0] == 0:
        raise ValueError("test_points must be a nonempty (m, d) array")
    K = gram_matrix(spec, design, include_noise=True)
    factor, _ = cholesky_with_jitter(K)
    kx = cross_cov(spec, design, test)
    q = solve_triangular(factor, kx, lower=True)
    total = spec.total_variance
    v = total - np.sum(q * q, axis=0)
    v = np.maximum(v, 0.0)
    return float(1.0 - v.sum() / (total * test.shape[0]))


def q2(y_true, y_pred) -> float:
    """Held-out coefficient of predictivity 1 - SSE / variance sum.

    Both sums run over the same evaluation points; a perfect predictor
    scores 1 and predicting the sample mean scores 0.
    """
    y_true = np.asarray(y_true, dtype=float).ravel()
    y_pred = np.asarray(y_pred, dtype=float).ravel()
    if y_true.size != y_pred.size:
        raise ValueError(f"length mismatch: {y_true.size} vs {y_pred.size}")
    if y_true.size < 2:
        raise ValueError("q2 needs at least two evaluation points")
    if not (np.all(np.isfinite(y_true)) and np.all(np.isfinite(y_pred))):
        raise ValueError("q2 inputs must be finite")
    denom = float(np.sum((y_true - y_true.mean()) ** 2))
    if denom == 0.0:
        raise ValueError("q2 is undefined for constant observations")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / denom)


# ---------------------------------------------------------------------------
# experiment records and seeding


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    d: int
    replicate: int
    parameter: float
    model_tag: str
    criterion: float
    seed: int


def derive_seed(root: int, *indices: int) -> int:
    """Deterministic 64-bit seed mixed from a root seed and cell indices."""
    ss = np.random.SeedSequence([int(root), *[int(i) for i in indices]])
    return int(ss.generate_state(1, np.uint64)[0])


def save_records(records, path, metadata: dict | None = None) -> None:
    """Write records as CSV plus a metadata sidecar JSON."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["experiment", "d", "replicate", "parameter", "model_tag", "criterion", "seed"]
        )
        for r in records:
            writer.writerow(
                [r.experiment, r.d, r.replicate, repr(float(r.parameter)),
                 r.model_tag, repr(float(r.criterion)), r.seed]
            )
    meta = {"rng": RNG_ALGORITHM, "version": _version}
    if metadata:
        meta.update(metadata)
    with open(path.with_suffix(".meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, default=str)
        fh.write("\n")


def save_fig_csv(rows, columns, path) -> None:
    """Write aggregated figure data: ``rows`` are dicts keyed by ``columns``."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [repr(float(row[c])) if isinstance(row[c], float) else row[c]
                 for c in columns]
            )


def _run_cells(cells, worker, jobs: int) -> list:
    if jobs <= 1:
        return [worker(c) for c in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, cells))


def _lhs(n: int, d: int, seed: int) -> Design:
    return generate(DoeConfig(DesignKind.LHS, n=n, d=d, seed=seed))


def _uniform_points(m: int, d: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(size=(m, d))


# ---------------------------------------------------------------------------
# p-collapse


def run_p_collapse(d_grid, thetas, n_test: int, seed: int, replicates: int = 1,
                   jobs: int = 1) -> list[ExperimentRecord]:
    """P of a separable squared-exponential model on 10*d-point LHS designs.

    ``thetas`` entries are numbers, or the string ``"sqrt"`` meaning
    theta = sqrt(d) for each dimension of the grid.  One record per
    (d, theta, replicate) cell; ``parameter`` holds the resolved theta.
    """
    d_grid, thetas = list(d_grid), list(thetas)
    _check_grid(d_grid, n_test, replicates)
    if not thetas:
        raise ValueError("thetas must be nonempty")
    for t in thetas:
        if t != "sqrt" and float(t) <= 0:
            raise ValueError(f"theta entries must be positive or 'sqrt', got {t!r}")
    cells = [
        (i, j, rep)
        for i in range(len(d_grid))
        for j in range(len(thetas))
        for rep in range(replicates)
    ]

    def worker(cell):
        i, j, rep = cell
        d = int(d_grid[i])
        theta = float(np.sqrt(d)) if thetas[j] == "sqrt" else float(thetas[j])
        cell_seed = derive_seed(seed, i, j, rep)
        design = _lhs(10 * d, d, derive_seed(cell_seed, 0))
        test = _uniform_points(n_test, d, derive_seed(cell_seed, 1))
        spec = KernelSpec.separable(KernelFamily.SQUARED_EXPONENTIAL, theta, 1.0, dim=d)
        value = p_criterion(spec, design, test)
        return ExperimentRecord("p-collapse", d, rep, theta, "UKM", value, cell_seed)

    return _run_cells(cells, worker, jobs)


def fig_p_collapse(records) -> list[dict]:
    """Average P over replicates for each (d, theta): columns d, theta, P."""
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.d, r.parameter), []).append(r.criterion)
    return [
        {"d": d, "theta": theta, "P": float(np.mean(vals))}
        for (d, theta), vals in sorted(groups.items())
    ]


# ---------------------------------------------------------------------------
# additive vs separable parts of a combined predictor


def _eq_sum_specs(d: int) -> tuple[KernelSpec, KernelSpec]:
    """The fixed pair of unit-variance SE kernels with theta = 0.5."""
    spec_a = KernelSpec.additive(KernelFamily.SQUARED_EXPONENTIAL, 0.5, 1.0, dim=d)
    spec_s = KernelSpec.separable(KernelFamily.SQUARED_EXPONENTIAL, 0.5, 1.0, dim=d)
    return spec_a, spec_s


def run_add_vs_sep(d_grid, n_test: int, seed: int, replicates: int = 1,
                   jobs: int = 1) -> list[ExperimentRecord]:
    """Analytic predictivity of the additive and separable predictor parts.

    The data process is Y = Y_A + Y_S with independent components drawn
    from an additive and a separable SE kernel (both unit variance,
    theta = 0.5).  The combined posterior mean splits as m = m_A + m_S
    with m_C(t) = k_C(t)' (K_A + K_S)^-1 Y, and

        E[(Y(t) - m_C(t))^2] = K_A(t,t) + K_S(t,t)
                               - 2 (k_A + k_S)' C^-1 k_C + k_C' C^-1 k_C

    with C = K_A + K_S, which needs no sampling.  Two records per cell,
    tags mA and mS.
    """
    d_grid = list(d_grid)
    _check_grid(d_grid, n_test, replicates)
    cells = [(i, rep) for i in range(len(d_grid)) for rep in range(replicates)]

    def worker(cell):
        i, rep = cell
        d = int(d_grid[i])
        cell_seed = derive_seed(seed, i, rep)
        design = _lhs(10 * d, d, derive_seed(cell_seed, 0))
        test = _uniform_points(n_test, d, derive_seed(cell_seed, 1))
        spec_a, spec_s = _eq_sum_specs(d)
        c = gram_matrix(spec_a, design, False) + gram_matrix(spec_s, design, False)
        factor, _ = cholesky_with_jitter(c)
        ka = cross_cov(spec_a, design, test)
        ks = cross_cov(spec_s, design, test)
        w_sum = cho_solve((factor, True), ka + ks)
        total = 2.0  # K_A(t,t) + K_S(t,t), both kernels unit variance
        out = []
        for tag, kc in (("mA", ka), ("mS", ks)):
            wc = cho_solve((factor, True), kc)
            err = total - 2.0 * np.sum(w_sum * kc, axis=0) + np.sum(wc * kc, axis=0)
            value = float(1.0 - err.mean() / total)
            out.append(
                ExperimentRecord("add-vs-sep", d, rep, float("nan"), tag, value, cell_seed)
            )
        return out

    results = _run_cells(cells, worker, jobs)
    return [rec for pair in results for rec in pair]


def fig_add_vs_sep(records) -> list[dict]:
    """Average P per d and tag: columns d, P_mA, P_mS."""
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.d, r.model_tag), []).append(r.criterion)
    rows = []
    for d in sorted({r.d for r in records}):
        rows.append(
            {
                "d": d,
                "P_mA": float(np.mean(groups.get((d, "mA"), [np.nan]))),
                "P_mS": float(np.mean(groups.get((d, "mS"), [np.nan]))),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# g-function Q2 benchmark


def run_gfun_benchmark(d_grid, replicates: int, n_test: int, seed: int,
                       target: float = 0.75, cfg: FitConfig = FitConfig(),
                       jobs: int = 1) -> list[ExperimentRecord]:
    """Held-out Q2 of MLE-fitted additive (AKM) vs separable (UKM) models.

    For each d the g-function uses the common coefficient from
    :func:`solve_a1`; training designs are 10*d-point Latin hypercubes,
    evaluation uses ``n_test`` uniform points, and both models use
    Matern 5/2 kernels with an ordinary trend.  A failed fit yields a
    NaN criterion instead of aborting the run.
    """
    d_grid = list(d_grid)
    _check_grid(d_grid, n_test, replicates)
    a1 = {int(d): solve_a1(int(d), target) for d in d_grid}
    cells = [(i, rep) for i in range(len(d_grid)) for rep in range(replicates)]

    def worker(cell):
        i, rep = cell
        d = int(d_grid[i])
        g = GFunction(np.full(d, a1[d]))
        cell_seed = derive_seed(seed, i, rep)
        design = _lhs(10 * d, d, derive_seed(cell_seed, 0))
        y = g(design.points)
        test = _uniform_points(n_test, d, derive_seed(cell_seed, 1))
        y_test = g(test)
        out = []
        for k, (tag, structure) in enumerate((("UKM", "separable"), ("AKM", "additive"))):
            cell_cfg = replace(cfg, seed=derive_seed(cell_seed, 2 + k))
            try:
                result = mle_fit(KernelFamily.MATERN52, structure, design, y,
                                 OrdinaryTrend(), cell_cfg)
                model = fit(result.spec, design, y, OrdinaryTrend())
                value = q2(y_test, model.predict_mean(test))
            except (FitError, NumericalError, SingularDesignError):
                value = float("nan")
            out.append(
                ExperimentRecord("gfun-q2", d, rep, float("nan"), tag, value, cell_seed)
            )
        return out

    results = _run_cells(cells, worker, jobs)
    return [rec for pair in results for rec in pair]


def fig_q2_quartiles(records) -> list[dict]:
    """Q2 quartiles per d and model: columns d, model, q2_q25, q2_q50, q2_q75."""
    groups: dict[tuple, list] = {}
    for r in records:
        if np.isfinite(r.criterion):
            groups.setdefault((r.d, r.model_tag), []).append(r.criterion)
    rows = []
    for (d, tag), vals in sorted(groups.items()):
        lo, med, hi = np.percentile(vals, [25, 50, 75])
        rows.append(
            {"d": d, "model": tag, "q2_q25": float(lo), "q2_q50": float(med),
             "q2_q75": float(hi)}
        )
    return rows


@dataclass(frozen=True)
class EffectOverlay:
    """A fitted first-dimension submodel next to the analytic main effect."""

    grid: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    analytic: np.ndarray


def main_effect_overlay(d: int, seed: int, grid_size: int = 101,
                        target: float = 0.75,
                        cfg: FitConfig = FitConfig()) -> EffectOverlay:
    """Centered submodel of a fitted AKM vs the g-function main effect.

    Fits an additive Matern 5/2 model to the g-function at dimension
    ``d`` (same protocol as :func:`run_gfun_benchmark`) and tabulates the
    centered dimension-0 submodel and the analytic effect on a grid.
    """
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    a1 = solve_a1(d, target)
    g = GFunction(np.full(d, a1))
    cell_seed = derive_seed(seed, 0)
    design = _lhs(10 * d, d, derive_seed(cell_seed, 0))
    y = g(design.points)
    cell_cfg = replace(cfg, seed=derive_seed(cell_seed, 2))
    result = mle_fit(KernelFamily.MATERN52, "additive", design, y,
                     OrdinaryTrend(), cell_cfg)
    model = fit(result.spec, design, y, OrdinaryTrend())
    grid = np.linspace(0.0, 1.0, grid_size)
    curve = centered_submodel(model, 0, grid)
    return EffectOverlay(
        grid=grid, mean=curve.mean, variance=curve.variance,
        analytic=g.main_effect(0, grid),
    )


def _check_grid(d_grid, n_test: int, replicates: int) -> None:
    if not d_grid:
        raise ValueError("d_grid must be nonempty")
    if any(int(d) < 1 for d in d_grid):
        raise ValueError("dimensions must be >= 1")
    if n_test < 1:
        raise ValueError(f"n_test must be >= 1, got {n_test}")
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
