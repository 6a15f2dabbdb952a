"""Per-dimension submodels of an additive kriging model.

For an additive kernel K(x, y) = sum_i K_i(x_i, y_i) the posterior mean
splits into univariate pieces m_i(x_i) = k_i(x_i)' K^-1 (F - trend), one
per dimension, which sum (with the trend) to the full predictor.  Each
piece carries its own posterior variance

    v_i(x_i) = K_i(x_i, x_i) - k_i(x_i)' K^-1 k_i(x_i),

where K is the full noise-augmented Gram matrix of the model.

Submodels are only identified up to additive constants, so the exported
curves are centered to zero mean over [0, 1]:

    centered mean      m_i(x_i) - I[m_i]
    centered variance  v_i(x_i) - 2*I[K_i(x_i, .)] + 2*k_i(x_i)' K^-1 b_i
                       + II[K_i] - b_i' K^-1 b_i

with I[.] the integral over [0, 1], II[.] the double integral, and
b_i = I[k_i(.)].  Integrals use 64-node Gauss-Legendre quadrature mapped
to [0, 1] (exact to machine precision for ranges that are not much
smaller than the quadrature spacing, i.e. theta >= 0.05 or so).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import StructureError, _correlation, cross_cov_dim
from .kriging import GpModel, NumericalError

__all__ = [
    "QUAD_NODES",
    "SubmodelCurve",
    "submodel_mean",
    "submodel_var",
    "centered_submodel",
    "save_curve",
]

QUAD_NODES = 64

_raw_nodes, _raw_weights = np.polynomial.legendre.leggauss(QUAD_NODES)
_NODES = (_raw_nodes + 1.0) / 2.0
_WEIGHTS = _raw_weights / 2.0

_VAR_CLAMP = 1e-9


@dataclass(frozen=True)
class SubmodelCurve:
    """A univariate submodel tabulated on a grid."""

    dim: int
    grid: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    centered: bool = True


def _check_dim(model: GpModel, dim: int) -> None:
    if model.spec.structure != "additive":
        raise StructureError("submodels require an additive kernel")
    if not 0 <= dim < model.spec.dim:
        raise ValueError(f"dim must be in [0, {model.spec.dim}), got {dim}")


def _check_abscissae(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("abscissae must be finite")
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("abscissae must lie in [0, 1]")
    return x


def submodel_mean(model: GpModel, dim: int, x):
    """Uncentered submodel mean m_i at abscissa(e) ``x`` of dimension ``dim``."""
    _check_dim(model, dim)
    x = _check_abscissae(x)
    kx = cross_cov_dim(model.spec, model.design, dim, x)
    out = kx.T @ model.dual_weights
    return float(out) if x.ndim == 0 else out


def submodel_var(model: GpModel, dim: int, x):
    """Posterior variance of the dimension-``dim`` piece at ``x``.

    Falls back to the prior variance sigma2_i when the model holds no
    observations.
    """
    _check_dim(model, dim)
    x = _check_abscissae(x)
    single = x.ndim == 0
    kx = cross_cov_dim(model.spec, model.design, dim, np.atleast_1d(x))
    prior = model.spec.variances[dim]
    if model.n > 0:
        q = solve_triangular(model.factor, kx, lower=True)
        var = prior - np.sum(q * q, axis=0)
    else:
        var = np.full(kx.shape[1], prior)
    var = _clamp_var(var)
    return float(var[0]) if single else var


def _clamp_var(var: np.ndarray) -> np.ndarray:
    low = var.min() if var.size else 0.0
    if low < -_VAR_CLAMP:
        raise NumericalError(f"submodel variance {low:.3e} is negative beyond round-off")
    return np.maximum(var, 0.0)


def _integral_tables(model: GpModel, dim: int) -> dict:
    """Quadrature tables for dimension ``dim``, cached on the model.

    Recomputing the tables is idempotent, so a concurrent first call at
    worst duplicates work before one result lands in the cache.
    """
    cached = model._integral_cache.get(dim)
    if cached is not None:
        return cached
    spec = model.spec
    # b = integral of k_i(.) over [0, 1], one entry per design point
    kq = cross_cov_dim(spec, model.design, dim, _NODES)
    b = kq @ _WEIGHTS
    b_solve = model.solve(b)
    # double integral of the prior kernel over the unit square
    delta = _NODES[:, None] - _NODES[None, :]
    kgrid = spec.variances[dim] * _correlation(spec.family, delta, spec.ranges[dim])
    double_prior = float(_WEIGHTS @ kgrid @ _WEIGHTS)
    tables = {
        "b": b,
        "b_solve": b_solve,
        "mean_offset": float(b @ model.dual_weights),
        "double_prior": double_prior,
        "double_data": float(b @ b_solve),
    }
    model._integral_cache[dim] = tables
    return tables


def centered_submodel(model: GpModel, dim: int, grid=None) -> SubmodelCurve:
    """Submodel curve centered to zero integral over [0, 1].

    ``grid`` defaults to 101 equispaced points.  The centered variance is
    the posterior variance of m_i(x_i) - I[m_i] and is on average (over
    the grid) no larger than the uncentered one: centering removes the
    uncertainty shared by the whole curve.
    """
    _check_dim(model, dim)
    if grid is None:
        grid = np.linspace(0.0, 1.0, 101)
    grid = np.atleast_1d(_check_abscissae(grid))
    tables = _integral_tables(model, dim)
    spec = model.spec
    kx = cross_cov_dim(spec, model.design, dim, grid)

    mean = kx.T @ model.dual_weights - tables["mean_offset"]

    # single integral of the prior kernel, as a function of the abscissa
    delta = grid[:, None] - _NODES[None, :]
    kxi = spec.variances[dim] * _correlation(spec.family, delta, spec.ranges[dim])
    single_prior = kxi @ _WEIGHTS

    var_raw = submodel_var(model, dim, grid)
    var = (
        var_raw
        - 2.0 * single_prior
        + 2.0 * (kx.T @ tables["b_solve"])
        + tables["double_prior"]
        - tables["double_data"]
    )
    var = _clamp_var(var)
    return SubmodelCurve(dim=dim, grid=grid, mean=mean, variance=var, centered=True)


def save_curve(curve: SubmodelCurve, path) -> None:
    """Write a curve as CSV: a comment line with centering and grid size,
    then columns dim,x,mean,variance."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# centered={str(curve.centered).lower()} grid_size={len(curve.grid)}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["dim", "x", "mean", "variance"])
        for x, m, v in zip(curve.grid, curve.mean, curve.variance):
            writer.writerow([curve.dim, repr(float(x)), repr(float(m)), repr(float(v))])
