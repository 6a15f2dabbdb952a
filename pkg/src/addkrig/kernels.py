"""Stationary covariance kernels on the unit hypercube.

Two structures are supported over a common set of univariate families:

* separable: K(x, y) = sigma2 * prod_i k(x_i, y_i), the usual tensor-product
  kernel with a single process variance, and
* additive:  K(x, y) = sum_i sigma2_i * k(x_i, y_i), a sum of univariate
  kernels with per-dimension variances.

The squared-exponential family uses exp(-(x - y)^2 / theta^2), i.e. theta^2
in the denominator without the conventional factor 2.  All range/variance
conventions downstream (fitting, submodels, benchmarks) rely on this form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "StructureError",
    "eval_univariate",
    "eval_kernel",
    "gram_matrix",
    "cross_cov",
    "cross_cov_dim",
]

_SQRT5 = np.sqrt(5.0)


class StructureError(ValueError):
    """An operation was applied to a kernel structure that does not support it."""


class KernelFamily(str, Enum):
    SQUARED_EXPONENTIAL = "se"
    MATERN52 = "matern52"


def _correlation(family: KernelFamily, delta: np.ndarray, theta: float) -> np.ndarray:
    """Unit-variance correlation as a function of the lag ``delta``."""
    if family == KernelFamily.SQUARED_EXPONENTIAL:
        u = delta / theta
        return np.exp(-u * u)
    if family == KernelFamily.MATERN52:
        s = _SQRT5 * np.abs(delta) / theta
        return (1.0 + s + s * s / 3.0) * np.exp(-s)
    raise ValueError(f"unknown kernel family: {family!r}")


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of a d-dimensional kernel.

    Attributes
    ----------
    family : KernelFamily
        Univariate correlation family shared by all dimensions.
    structure : str
        Either ``"additive"`` or ``"separable"``.
    ranges : ndarray of shape (d,)
        Per-dimension range (length-scale) parameters theta_i > 0.
    variances : ndarray of shape (d,)
        For additive kernels, per-dimension variances sigma2_i > 0.  For
        separable kernels only ``variances[0]`` is the process variance;
        the remaining entries must equal 1.
    noise : float
        Observation noise variance tau2 >= 0.  Not part of K(x, y); it is
        added to the Gram diagonal on request.
    """

    family: KernelFamily
    structure: str
    ranges: np.ndarray
    variances: np.ndarray
    noise: float = 0.0

    def __post_init__(self):
        family = KernelFamily(self.family)
        ranges = np.atleast_1d(np.asarray(self.ranges, dtype=float)).copy()
        variances = np.atleast_1d(np.asarray(self.variances, dtype=float)).copy()
        if self.structure not in ("additive", "separable"):
            raise StructureError(f"unknown structure: {self.structure!r}")
        if ranges.ndim != 1 or variances.ndim != 1:
            raise ValueError("ranges and variances must be one-dimensional")
        if ranges.shape != variances.shape:
            raise ValueError(
                f"ranges and variances disagree on dimension: "
                f"{ranges.shape[0]} vs {variances.shape[0]}"
            )
        if ranges.size == 0:
            raise ValueError("kernel must have at least one dimension")
        if not np.all(np.isfinite(ranges)) or np.any(ranges <= 0):
            raise ValueError("ranges must be finite and strictly positive")
        if not np.all(np.isfinite(variances)):
            raise ValueError("variances must be finite")
        if self.structure == "additive":
            if np.any(variances <= 0):
                raise ValueError("additive variances must be strictly positive")
        else:
            if variances[0] <= 0:
                raise ValueError("separable process variance must be strictly positive")
            if variances.size > 1 and not np.all(variances[1:] == 1.0):
                raise ValueError(
                    "separable kernels carry a single variance: variances[1:] must be 1"
                )
        noise = float(self.noise)
        if not np.isfinite(noise) or noise < 0:
            raise ValueError(f"noise variance must be finite and >= 0, got {noise}")
        ranges.setflags(write=False)
        variances.setflags(write=False)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "noise", noise)

    @classmethod
    def additive(cls, family, ranges, variance=1.0, noise=0.0, dim=None) -> "KernelSpec":
        """Build an additive spec.

        A scalar ``variance`` is split equally across dimensions so the
        total process variance K(x, x) equals ``variance``.  A scalar
        ``ranges`` requires ``dim`` and is broadcast.
        """
        ranges = _broadcast_ranges(ranges, dim)
        d = ranges.size
        variance = np.asarray(variance, dtype=float)
        if variance.ndim == 0:
            variances = np.full(d, float(variance) / d)
        else:
            variances = variance
        return cls(family, "additive", ranges, variances, noise)

    @classmethod
    def separable(cls, family, ranges, variance=1.0, noise=0.0, dim=None) -> "KernelSpec":
        """Build a separable spec with a single process variance."""
        ranges = _broadcast_ranges(ranges, dim)
        variances = np.ones(ranges.size)
        variances[0] = float(variance)
        return cls(family, "separable", ranges, variances, noise)

    @property
    def dim(self) -> int:
        return self.ranges.size

    @property
    def total_variance(self) -> float:
        """Prior variance K(x, x), independent of x by stationarity."""
        if self.structure == "additive":
            return float(self.variances.sum())
        return float(self.variances[0])

    def with_noise(self, noise: float) -> "KernelSpec":
        return KernelSpec(self.family, self.structure, self.ranges, self.variances, noise)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "structure": self.structure,
            "ranges": self.ranges.tolist(),
            "variances": self.variances.tolist(),
            "noise": self.noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        required = {"family", "structure", "ranges", "variances", "noise"}
        missing = required - d.keys()
        if missing:
            raise ValueError(f"kernel spec is missing keys: {sorted(missing)}")
        unknown = d.keys() - required
        if unknown:
            raise ValueError(f"kernel spec has unknown keys: {sorted(unknown)}")
        return cls(
            KernelFamily(d["family"]),
            d["structure"],
            np.asarray(d["ranges"], dtype=float),
            np.asarray(d["variances"], dtype=float),
            float(d["noise"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "KernelSpec":
        return cls.from_dict(json.loads(s))


def _broadcast_ranges(ranges, dim) -> np.ndarray:
    arr = np.asarray(ranges, dtype=float)
    if arr.ndim == 0:
        if dim is None:
            raise ValueError("scalar ranges need an explicit dim")
        arr = np.full(int(dim), float(arr))
    elif dim is not None and arr.size != dim:
        raise ValueError(f"ranges has length {arr.size}, expected dim={dim}")
    return arr


def _as_points(design) -> np.ndarray:
    """Accept a Design or a raw (n, d) array and return the point matrix."""
    pts = getattr(design, "points", design)
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2:
        raise ValueError(f"design points must be a 2-d array, got shape {pts.shape}")
    return pts


def _check_query(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"query points must have {dim} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("query points must be finite")
    return x


def eval_univariate(family, x, y, theta: float, sigma2: float):
    """Evaluate one univariate kernel term sigma2 * k(x, y).

    ``x`` and ``y`` may be scalars or broadcastable arrays.
    """
    family = KernelFamily(family)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("kernel inputs must be finite")
    if not np.isfinite(theta) or theta <= 0:
        raise ValueError(f"theta must be finite and > 0, got {theta}")
    if not np.isfinite(sigma2) or sigma2 < 0:
        raise ValueError(f"sigma2 must be finite and >= 0, got {sigma2}")
    out = sigma2 * _correlation(family, x - y, theta)
    return out if out.ndim else float(out)


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate K(x, y) for the given spec (noise excluded)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    d = spec.dim
    if x.size != d or y.size != d:
        raise ValueError(f"points must have {d} coordinates, got {x.size} and {y.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("kernel inputs must be finite")
    terms = _correlation(spec.family, x - y, spec.ranges)
    if spec.structure == "additive":
        return float(np.sum(spec.variances * terms))
    return float(spec.variances[0] * np.prod(terms))


def gram_matrix(spec: KernelSpec, design, include_noise: bool = True) -> np.ndarray:
    """Symmetric n x n Gram matrix of the design, plus noise*I on request."""
    pts = _as_points(design)
    n, d = pts.shape
    if n == 0:
        raise ValueError("design must contain at least one point")
    if d != spec.dim:
        raise ValueError(f"design has {d} columns but kernel has dim {spec.dim}")
    K = _accumulate(spec, pts, pts)
    if include_noise and spec.noise > 0:
        K = K + spec.noise * np.eye(n)
    return K


def cross_cov(spec: KernelSpec, design, x) -> np.ndarray:
    """Covariances k(x) between the design and query points.

    Returns shape (n,) for a single d-vector ``x`` and (n, m) for an
    (m, d) batch.  Noise never enters cross-covariances.
    """
    pts = _as_points(design)
    if pts.shape[1] != spec.dim:
        raise ValueError(f"design has {pts.shape[1]} columns but kernel has dim {spec.dim}")
    single = np.asarray(x).ndim == 1
    X = _check_query(x, spec.dim)
    K = _accumulate(spec, pts, X)
    return K[:, 0] if single else K


def cross_cov_dim(spec: KernelSpec, design, dim: int, x_i) -> np.ndarray:
    """Per-dimension covariance vector k_i(x_i) of an additive kernel.

    Returns shape (n,) for scalar ``x_i`` and (n, m) for an array of m
    abscissae.  Only defined for additive structure.
    """
    if spec.structure != "additive":
        raise StructureError("per-dimension covariances require an additive kernel")
    if not 0 <= dim < spec.dim:
        raise ValueError(f"dim must be in [0, {spec.dim}), got {dim}")
    pts = _as_points(design)
    if pts.shape[1] != spec.dim:
        raise ValueError(f"design has {pts.shape[1]} columns but kernel has dim {spec.dim}")
    x_i = np.asarray(x_i, dtype=float)
    if not np.all(np.isfinite(x_i)):
        raise ValueError("query abscissae must be finite")
    single = x_i.ndim == 0
    xi = np.atleast_1d(x_i)
    delta = pts[:, dim : dim + 1] - xi[None, :]
    out = spec.variances[dim] * _correlation(spec.family, delta, spec.ranges[dim])
    return out[:, 0] if single else out


def _accumulate(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel matrix K[j, k] = K(a_j, b_k), assembled one dimension at a time."""
    out = None
    for i in range(spec.dim):
        delta = a[:, i : i + 1] - b[None, :, i]
        term = _correlation(spec.family, delta, spec.ranges[i])
        if spec.structure == "additive":
            term = spec.variances[i] * term
            out = term if out is None else out + term
        else:
            out = term if out is None else out * term
    if spec.structure == "separable":
        out = spec.variances[0] * out
    return out
