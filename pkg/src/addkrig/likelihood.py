"""Gaussian log-likelihood and multi-start maximum-likelihood fitting.

The objective is the exact log density of the observations under the GP
prior, computed through one Cholesky factorization per evaluation:

    log L = -1/2 r' K^-1 r - 1/2 log det K - n/2 log 2 pi

with K the noise-augmented Gram matrix and r the observations minus the
trend.  For an ordinary trend the GLS constant is profiled out before
the quadratic form is evaluated.

``mle_fit`` searches over log-transformed parameters (ranges, variances,
noise) with a Nelder-Mead simplex restarted from several log-uniformly
drawn starting points.  Everything is driven by one seed: identical
data and config reproduce the returned spec bitwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve
from scipy.optimize import minimize

from .design import Design
from .kernels import KernelFamily, KernelSpec, gram_matrix
from .kriging import NumericalError, OrdinaryTrend, SimpleTrend, cholesky_with_jitter

__all__ = [
    "FitError",
    "FitConfig",
    "TraceRow",
    "FitResult",
    "log_likelihood",
    "mle_fit",
    "save_trace",
]

_LOG_2PI = np.log(2.0 * np.pi)


class FitError(RuntimeError):
    """Maximum-likelihood search could not produce a usable spec."""


def log_likelihood(spec: KernelSpec, design, observations, trend=SimpleTrend(0.0)) -> float:
    """Exact Gaussian log-likelihood of the observations under ``spec``."""
    if not isinstance(design, Design):
        design = Design(np.asarray(design, dtype=float))
    y = np.asarray(observations, dtype=float).ravel()
    n = len(design)
    if n == 0:
        raise ValueError("log-likelihood requires at least one observation")
    if y.size != n:
        raise ValueError(f"got {y.size} observations for {n} design points")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must be finite")
    if design.dim != spec.dim:
        raise ValueError(f"design has {design.dim} columns but kernel has dim {spec.dim}")

    K = gram_matrix(spec, design, include_noise=True)
    factor, _ = cholesky_with_jitter(K)
    if isinstance(trend, OrdinaryTrend):
        w = cho_solve((factor, True), np.ones(n))
        mu = float(w @ y) / float(w.sum())
    elif isinstance(trend, SimpleTrend):
        mu = trend.mean
    else:
        raise TypeError(f"unknown trend type: {trend!r}")
    r = y - mu
    alpha = cho_solve((factor, True), r)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor))))
    return float(-0.5 * (r @ alpha + logdet + n * _LOG_2PI))


@dataclass(frozen=True)
class FitConfig:
    """Search configuration for :func:`mle_fit`.

    ``isotropic`` ties all ranges to a single value and, for additive
    kernels, splits one total variance equally across dimensions.
    Bounds apply to the natural (not log) parameters.
    """

    n_starts: int = 5
    max_evals: int = 2000
    seed: int = 0
    isotropic: bool = True
    theta_bounds: tuple = (1e-2, 1e2)
    sigma2_bounds: tuple = (1e-4, 1e4)
    noise_bounds: tuple = (1e-8, 1e1)

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError(f"n_starts must be >= 1, got {self.n_starts}")
        if self.max_evals < 1:
            raise ValueError(f"max_evals must be >= 1, got {self.max_evals}")
        for name in ("theta_bounds", "sigma2_bounds", "noise_bounds"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi):
                raise ValueError(f"{name} must satisfy 0 < lo < hi, got ({lo}, {hi})")

    def to_dict(self) -> dict:
        return {
            "n_starts": self.n_starts,
            "max_evals": self.max_evals,
            "seed": self.seed,
            "isotropic": self.isotropic,
            "theta_bounds": list(self.theta_bounds),
            "sigma2_bounds": list(self.sigma2_bounds),
            "noise_bounds": list(self.noise_bounds),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        kwargs = dict(d)
        for name in ("theta_bounds", "sigma2_bounds", "noise_bounds"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


@dataclass(frozen=True)
class TraceRow:
    start: int
    iteration: int
    objective: float
    params: dict


@dataclass
class FitResult:
    spec: KernelSpec
    log_likelihood: float
    degenerate: bool
    trace: list = field(default_factory=list)


class _Parametrization:
    """Maps between log-parameter vectors and kernel specs."""

    def __init__(self, family, structure: str, dim: int, cfg: FitConfig):
        self.family = KernelFamily(family)
        self.structure = structure
        self.dim = dim
        self.cfg = cfg
        if structure not in ("additive", "separable"):
            raise ValueError(f"unknown structure: {structure!r}")
        n_theta = 1 if cfg.isotropic else dim
        n_sigma = 1 if (cfg.isotropic or structure == "separable") else dim
        self.labels = (
            (["theta"] if n_theta == 1 else [f"theta{i + 1}" for i in range(dim)])
            + (["sigma2"] if n_sigma == 1 else [f"sigma2_{i + 1}" for i in range(dim)])
            + ["noise"]
        )
        self.n_theta = n_theta
        self.n_sigma = n_sigma
        lo = ([cfg.theta_bounds[0]] * n_theta + [cfg.sigma2_bounds[0]] * n_sigma
              + [cfg.noise_bounds[0]])
        hi = ([cfg.theta_bounds[1]] * n_theta + [cfg.sigma2_bounds[1]] * n_sigma
              + [cfg.noise_bounds[1]])
        self.log_lower = np.log(lo)
        self.log_upper = np.log(hi)

    @property
    def size(self) -> int:
        return self.n_theta + self.n_sigma + 1

    def spec_of(self, logp: np.ndarray) -> KernelSpec:
        p = np.exp(logp)
        theta = p[: self.n_theta]
        sigma2 = p[self.n_theta : self.n_theta + self.n_sigma]
        noise = float(p[-1])
        ranges = np.full(self.dim, theta[0]) if self.n_theta == 1 else theta
        if self.structure == "separable":
            return KernelSpec.separable(self.family, ranges, float(sigma2[0]), noise)
        if self.n_sigma == 1:
            return KernelSpec.additive(self.family, ranges, float(sigma2[0]), noise)
        return KernelSpec.additive(self.family, ranges, sigma2, noise)

    def logp_of(self, spec: KernelSpec) -> np.ndarray:
        if KernelFamily(spec.family) != self.family or spec.structure != self.structure:
            raise ValueError("start spec does not match the requested family/structure")
        if spec.dim != self.dim:
            raise ValueError(f"start spec has dim {spec.dim}, expected {self.dim}")
        if self.n_theta == 1:
            if np.ptp(spec.ranges) != 0:
                raise ValueError("isotropic search cannot start from unequal ranges")
            theta = [spec.ranges[0]]
        else:
            theta = spec.ranges
        if self.structure == "separable":
            sigma2 = [spec.variances[0]]
        elif self.n_sigma == 1:
            if np.ptp(spec.variances) != 0:
                raise ValueError("isotropic search cannot start from unequal variances")
            sigma2 = [spec.total_variance]
        else:
            sigma2 = spec.variances
        noise = max(spec.noise, self.cfg.noise_bounds[0])
        logp = np.log(np.concatenate([theta, sigma2, [noise]]))
        return np.clip(logp, self.log_lower, self.log_upper)

    def params_dict(self, logp: np.ndarray) -> dict:
        return dict(zip(self.labels, np.exp(logp)))


def mle_fit(family, structure, design, observations, trend=OrdinaryTrend(),
            cfg: FitConfig = FitConfig(), extra_starts=()) -> FitResult:
    """Maximize the log-likelihood over kernel parameters.

    Runs ``cfg.n_starts`` Nelder-Mead searches from log-uniform starting
    points inside the bounds (plus any ``extra_starts`` specs appended as
    additional starting points) and keeps the best final value, ties
    going to the lowest start index.  The trace records, per start, the
    objective at the starting point and after each simplex iteration.

    Constant observations carry no information about the ranges, so the
    result is flagged ``degenerate`` (the noise then sits at its lower
    bound rather than pretending to be estimated).
    """
    if not isinstance(design, Design):
        design = Design(np.asarray(design, dtype=float))
    y = np.asarray(observations, dtype=float).ravel()
    if y.size != len(design):
        raise ValueError(f"got {y.size} observations for {len(design)} design points")
    if y.size < 3:
        raise ValueError("the likelihood search needs at least 3 observations; "
                         "fewer leave the parameters underdetermined")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must be finite")
    par = _Parametrization(family, structure, design.dim, cfg)

    def objective(logp: np.ndarray) -> float:
        try:
            return -log_likelihood(par.spec_of(logp), design, y, trend)
        except NumericalError:
            return np.inf

    rng = np.random.default_rng(cfg.seed)
    starts = [
        rng.uniform(par.log_lower, par.log_upper) for _ in range(cfg.n_starts)
    ]
    starts.extend(par.logp_of(s) for s in extra_starts)
    bounds = list(zip(par.log_lower, par.log_upper))

    best = None
    trace: list[TraceRow] = []
    for s, x0 in enumerate(starts):
        seen: dict[bytes, float] = {}

        def wrapped(logp, _seen=seen):
            val = objective(logp)
            _seen[logp.tobytes()] = val
            return val

        rows = [TraceRow(s, 0, -wrapped(x0), par.params_dict(x0))]

        def record(xk, _seen=seen, _rows=rows, _s=s):
            val = _seen.get(xk.tobytes())
            if val is None:
                val = objective(xk)
            _rows.append(TraceRow(_s, len(_rows), -val, par.params_dict(xk)))

        res = minimize(
            wrapped,
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            callback=record,
            options={"maxfev": cfg.max_evals, "xatol": 1e-6, "fatol": 1e-9},
        )
        trace.extend(rows)
        if np.isfinite(res.fun) and (best is None or res.fun < best[0]):
            best = (res.fun, res.x)

    if best is None:
        raise FitError("every start failed: the likelihood was not computable "
                       "anywhere in the search region")

    spec = par.spec_of(best[1])
    best_ll = -best[0]
    degenerate = bool(y.size > 0 and np.ptp(y) == 0.0)
    if degenerate and spec.noise != cfg.noise_bounds[0]:
        # constant data say nothing about the noise: pin it, don't guess
        pinned = spec.with_noise(cfg.noise_bounds[0])
        try:
            best_ll = log_likelihood(pinned, design, y, trend)
            spec = pinned
        except NumericalError:
            pass
    return FitResult(spec=spec, log_likelihood=best_ll, degenerate=degenerate,
                     trace=trace)


def save_trace(result: FitResult, path) -> None:
    """Write the optimizer trace as CSV: start, iteration, objective, parameters."""
    path = Path(path)
    if not result.trace:
        raise ValueError("fit result carries no trace")
    labels = list(result.trace[0].params)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start", "iteration", "objective"] + labels)
        for row in result.trace:
            writer.writerow(
                [row.start, row.iteration, repr(float(row.objective))]
                + [repr(float(row.params[k])) for k in labels]
            )
