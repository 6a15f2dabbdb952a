"""Gaussian-process interpolation with a known or estimated constant trend.

Given observations F at a design X and a kernel spec, ``fit`` factorizes
the (noise-augmented) Gram matrix once and stores dual weights
alpha = K^-1 (F - trend), so that

    mean(x) = trend + k(x)' alpha
    var(x)  = K(x, x) - k(x)' K^-1 k(x)   (+ trend-estimation term below)

With an ordinary trend the constant is the generalized least-squares
estimate mu = (1' K^-1 F) / (1' K^-1 1) and the variance picks up the
correction (1 - 1' K^-1 k(x))^2 / (1' K^-1 1) for estimating it.

Additive kernels on axis-aligned designs can make the noise-free Gram
exactly singular (observations then satisfy a linear relation almost
surely).  ``detect_rank_deficiency`` reports the null directions, the
points involved, and a minimal set of points whose removal restores full
rank; ``fit`` refuses such designs instead of silently regularizing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .design import Design
from .kernels import KernelSpec, cross_cov, gram_matrix

__all__ = [
    "NumericalError",
    "SingularDesignError",
    "SimpleTrend",
    "OrdinaryTrend",
    "RankReport",
    "GpModel",
    "detect_rank_deficiency",
    "cholesky_with_jitter",
    "fit",
    "predict_mean",
    "predict_var",
    "save_model",
    "load_model",
]

# Entries of a null eigenvector below this magnitude are treated as zero
# when deciding which points participate in a linear relation.
_NULL_ENTRY_TOL = 1e-8

# predict_var clamps round-off negatives up to this magnitude to zero;
# anything more negative indicates a real numerical problem.
_VAR_CLAMP = 1e-9


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond what jitter is allowed to absorb."""


class SingularDesignError(RuntimeError):
    """Noise-free Gram matrix is rank deficient for this kernel and design."""

    def __init__(self, report: "RankReport"):
        super().__init__(
            "noise-free Gram matrix is rank deficient; removing design "
            f"point(s) {report.removable} would restore full rank "
            "(or add observation noise)"
        )
        self.report = report


@dataclass(frozen=True)
class SimpleTrend:
    """Known constant trend (defaults to zero)."""

    mean: float = 0.0


@dataclass(frozen=True)
class OrdinaryTrend:
    """Constant trend estimated from the data by generalized least squares."""


def trend_to_dict(trend) -> dict:
    if isinstance(trend, SimpleTrend):
        return {"mode": "simple", "mean": trend.mean}
    if isinstance(trend, OrdinaryTrend):
        return {"mode": "ordinary"}
    raise TypeError(f"unknown trend type: {trend!r}")


def trend_from_dict(d: dict):
    mode = d.get("mode")
    if mode == "simple":
        return SimpleTrend(float(d.get("mean", 0.0)))
    if mode == "ordinary":
        return OrdinaryTrend()
    raise ValueError(f"unknown trend mode: {mode!r}")


@dataclass
class RankReport:
    """Eigenvalue audit of a noise-free Gram matrix.

    ``null_vectors`` spans the numerical null space (eigenvalue at most
    tol times the largest), ``implicated`` lists the points with a
    nonzero coefficient in each null vector, and ``removable`` is a set
    of point indices, one per null direction, whose removal makes the
    remaining Gram full rank.
    """

    deficient: bool
    tol: float
    eigenvalues: np.ndarray
    null_vectors: list = field(default_factory=list)
    implicated: list = field(default_factory=list)
    removable: list = field(default_factory=list)

    def describe(self) -> str:
        if not self.deficient:
            return (
                f"Gram matrix is full rank (min eigenvalue {self.eigenvalues[0]:.3e}, "
                f"max {self.eigenvalues[-1]:.3e}, tol {self.tol:g})"
            )
        lines = [
            f"Gram matrix is rank deficient: {len(self.null_vectors)} null "
            f"direction(s) among {len(self.eigenvalues)} points (tol {self.tol:g})"
        ]
        for k, vec in enumerate(self.null_vectors):
            scaled = vec / np.max(np.abs(vec))
            terms = [
                f"{scaled[i]:+.3f}*y[{i}]"
                for i in range(len(scaled))
                if abs(scaled[i]) > _NULL_ENTRY_TOL
            ]
            lines.append(f"  null relation {k}: " + " ".join(terms) + " = 0")
        lines.append(f"  removable point(s): {self.removable}")
        return "\n".join(lines)


def detect_rank_deficiency(spec: KernelSpec, design, tol: float = 1e-8) -> RankReport:
    """Audit the noise-free Gram matrix of ``design`` under ``spec``.

    An eigenvalue is counted as null when it is at most ``tol`` times the
    largest eigenvalue.  The removable set is built greedily: repeatedly
    drop the point with the largest coefficient in the current smallest
    eigenvector until the remaining Gram passes the same test.
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    K = gram_matrix(spec, design, include_noise=False)
    evals, evecs = np.linalg.eigh(K)
    threshold = tol * evals[-1]
    null_mask = evals <= threshold
    report = RankReport(deficient=bool(null_mask.any()), tol=tol, eigenvalues=evals)
    if not report.deficient:
        return report
    for k in np.nonzero(null_mask)[0]:
        vec = evecs[:, k]
        report.null_vectors.append(vec)
        report.implicated.append(
            [int(i) for i in np.nonzero(np.abs(vec) > _NULL_ENTRY_TOL)[0]]
        )
    remaining = list(range(K.shape[0]))
    while len(remaining) > 1:
        sub = K[np.ix_(remaining, remaining)]
        sub_evals, sub_evecs = np.linalg.eigh(sub)
        if sub_evals[0] > tol * sub_evals[-1]:
            break
        drop = int(np.argmax(np.abs(sub_evecs[:, 0])))
        report.removable.append(remaining.pop(drop))
    report.removable.sort()
    return report


def cholesky_with_jitter(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K``, adding diagonal jitter if needed.

    Jitter starts at 1e-10 * trace/n and grows tenfold up to 1e-6 * trace/n;
    beyond that the matrix is declared numerically non-positive.
    Returns (factor, jitter_used).
    """
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = np.trace(K) / n
    if not np.isfinite(scale) or scale <= 0:
        raise NumericalError(
            f"Gram matrix has non-positive average diagonal {scale:.3e}; "
            "no amount of jitter can make it positive definite"
        )
    jitter = 1e-10 * scale
    cap = 1e-6 * scale
    while jitter <= cap * (1 + 1e-12):
        try:
            return np.linalg.cholesky(K + jitter * np.eye(n)), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError(
        "Cholesky factorization failed even with maximum jitter "
        f"{cap:.3e}; the Gram matrix is numerically singular"
    )


class GpModel:
    """A fitted model: kernel spec, data, Cholesky factor, dual weights.

    Instances come from :func:`fit` (or :meth:`GpModel.prior` for the
    no-data edge case) and are treated as immutable.
    """

    def __init__(
        self,
        spec: KernelSpec,
        design: Design,
        observations: np.ndarray,
        trend,
        trend_estimate: float,
        factor: np.ndarray,
        dual_weights: np.ndarray,
        jitter: float = 0.0,
        noise_cov: np.ndarray | None = None,
        ones_weights: np.ndarray | None = None,
        ones_scale: float | None = None,
    ):
        self.spec = spec
        self.design = design
        self.observations = observations
        self.trend = trend
        self.trend_estimate = trend_estimate
        self.factor = factor
        self.dual_weights = dual_weights
        self.jitter = jitter
        self.noise_cov = noise_cov
        self.ones_weights = ones_weights
        self.ones_scale = ones_scale
        # integral tables for centered submodels, keyed by dimension
        self._integral_cache: dict = {}

    @classmethod
    def prior(cls, spec: KernelSpec, trend=SimpleTrend(0.0)) -> "GpModel":
        """Model conditioned on nothing: mean is the trend, variance the prior."""
        if isinstance(trend, OrdinaryTrend):
            raise ValueError("an ordinary trend cannot be estimated without data")
        empty = Design(np.empty((0, spec.dim)))
        return cls(
            spec,
            empty,
            np.empty(0),
            trend,
            trend.mean,
            np.zeros((0, 0)),
            np.empty(0),
        )

    @property
    def n(self) -> int:
        return len(self.design)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """K^-1 b through the stored Cholesky factor."""
        if self.n == 0:
            return np.zeros_like(b)
        return cho_solve((self.factor, True), b)

    def predict_mean(self, x):
        """Posterior mean at ``x``: a float for one point, an array for a batch."""
        single = np.asarray(x).ndim == 1
        kx = cross_cov(self.spec, self.design, x)
        mean = self.trend_estimate + kx.T @ self.dual_weights
        if single:
            return float(mean)
        return mean

    def predict_var(self, x):
        """Posterior variance at ``x`` (noise-free, i.e. of the latent process)."""
        single = np.asarray(x).ndim == 1
        kx = cross_cov(self.spec, self.design, x)
        if single:
            kx = kx[:, None]
        prior = self.spec.total_variance
        if self.n > 0:
            q = solve_triangular(self.factor, kx, lower=True)
            var = prior - np.sum(q * q, axis=0)
        else:
            var = np.full(kx.shape[1], prior)
        if self.ones_weights is not None:
            u = kx.T @ self.ones_weights
            var = var + (1.0 - u) ** 2 / self.ones_scale
        low = var.min() if var.size else 0.0
        if low < -_VAR_CLAMP:
            raise NumericalError(
                f"posterior variance {low:.3e} is negative beyond round-off"
            )
        var = np.maximum(var, 0.0)
        if single:
            return float(var[0])
        return var

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        if self.noise_cov is not None:
            raise ValueError(
                "models with a full noise covariance matrix are in-memory only"
            )
        return {
            "kernel": self.spec.to_dict(),
            "design": self.design.points.tolist(),
            "observations": self.observations.tolist(),
            "trend": trend_to_dict(self.trend),
            "trend_estimate": self.trend_estimate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GpModel":
        """Rebuild a model from its serialized form.

        The factorization and all derived quantities are recomputed from
        the embedded spec, design, and observations, so predictions match
        the original model bitwise.
        """
        required = {"kernel", "design", "observations", "trend", "trend_estimate"}
        missing = required - d.keys()
        if missing:
            raise ValueError(f"model JSON is missing keys: {sorted(missing)}")
        spec = KernelSpec.from_dict(d["kernel"])
        trend = trend_from_dict(d["trend"])
        obs = np.asarray(d["observations"], dtype=float)
        if obs.size == 0:
            return cls.prior(spec, trend)
        pts = np.asarray(d["design"], dtype=float)
        return fit(spec, Design(pts), obs, trend)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "GpModel":
        return cls.from_dict(json.loads(s))


def fit(spec: KernelSpec, design, observations, trend=SimpleTrend(0.0), *,
        noise_cov: np.ndarray | None = None) -> GpModel:
    """Condition a GP with kernel ``spec`` on observations at ``design``.

    With zero observation noise the design is audited first and a
    :class:`SingularDesignError` names the points to remove if the Gram
    matrix is rank deficient.  ``noise_cov`` optionally adds a full PSD
    noise covariance to the Gram matrix (used when the residual around
    the modeled part is itself a correlated process); such models cannot
    be serialized.
    """
    if not isinstance(design, Design):
        design = Design(np.asarray(design, dtype=float))
    y = np.asarray(observations, dtype=float).ravel()
    n = len(design)
    if n == 0:
        raise ValueError("fit requires at least one observation")
    if y.size != n:
        raise ValueError(f"got {y.size} observations for {n} design points")
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must be finite")
    if design.dim != spec.dim:
        raise ValueError(f"design has {design.dim} columns but kernel has dim {spec.dim}")
    if noise_cov is not None:
        noise_cov = np.asarray(noise_cov, dtype=float)
        if noise_cov.shape != (n, n):
            raise ValueError(f"noise_cov must have shape ({n}, {n})")
        if not np.allclose(noise_cov, noise_cov.T):
            raise ValueError("noise_cov must be symmetric")

    if spec.noise == 0.0 and noise_cov is None:
        report = detect_rank_deficiency(spec, design)
        if report.deficient:
            raise SingularDesignError(report)

    K = gram_matrix(spec, design, include_noise=True)
    if noise_cov is not None:
        K = K + noise_cov
    factor, jitter = cholesky_with_jitter(K)

    ones_weights = None
    ones_scale = None
    if isinstance(trend, OrdinaryTrend):
        ones_weights = cho_solve((factor, True), np.ones(n))
        ones_scale = float(ones_weights.sum())
        trend_estimate = float(ones_weights @ y) / ones_scale
    elif isinstance(trend, SimpleTrend):
        trend_estimate = trend.mean
    else:
        raise TypeError(f"unknown trend type: {trend!r}")

    dual_weights = cho_solve((factor, True), y - trend_estimate)
    return GpModel(
        spec, design, y, trend, trend_estimate, factor, dual_weights,
        jitter=jitter, noise_cov=noise_cov,
        ones_weights=ones_weights, ones_scale=ones_scale,
    )


def predict_mean(model: GpModel, x):
    return model.predict_mean(x)


def predict_var(model: GpModel, x):
    return model.predict_var(x)


def save_model(model: GpModel, path) -> None:
    Path(path).write_text(model.to_json() + "\n")


def load_model(path) -> GpModel:
    return GpModel.from_json(Path(path).read_text())
