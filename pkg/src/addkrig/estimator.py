"""Scikit-learn compatible front end for the kriging core.

``KrigingRegressor`` follows the estimator protocol (get_params /
set_params / fit / predict / score) so it can be cloned, grid-searched,
and pipelined.  It is a thin wrapper: all numerics live in the
functional modules, and the fitted :class:`addkrig.kriging.GpModel` is
exposed as ``model_`` for everything the sklearn surface does not cover
(submodels, serialization, singularity reports).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .design import Design
from .kernels import KernelSpec
from .kriging import OrdinaryTrend, SimpleTrend, fit as krig_fit
from .likelihood import FitConfig, mle_fit

__all__ = ["KrigingRegressor"]


class KrigingRegressor(RegressorMixin, BaseEstimator):
    """Kriging on [0, 1]^d with an additive or separable kernel.

    Parameters
    ----------
    structure : {"additive", "separable"}
    family : {"matern52", "se"}
    trend : {"ordinary", "simple"}
        Ordinary estimates a constant trend by GLS; simple uses
        ``trend_mean`` as a known constant.
    trend_mean : float
        Trend constant for ``trend="simple"``.
    kernel_spec : KernelSpec or dict, optional
        Fixed kernel parameters.  When given, no likelihood search runs
        and ``structure`` / ``family`` are taken from it.
    n_starts, max_evals, isotropic : likelihood search controls.
    noise_bounds : (lo, hi) bounds for the fitted noise variance.
    random_state : int
        Seed for the search's starting points.
    """

    def __init__(self, structure="additive", family="matern52", trend="ordinary",
                 trend_mean=0.0, kernel_spec=None, n_starts=5, max_evals=2000,
                 isotropic=True, noise_bounds=(1e-8, 1e1), random_state=0):
        self.structure = structure
        self.family = family
        self.trend = trend
        self.trend_mean = trend_mean
        self.kernel_spec = kernel_spec
        self.n_starts = n_starts
        self.max_evals = max_evals
        self.isotropic = isotropic
        self.noise_bounds = noise_bounds
        self.random_state = random_state

    def _trend(self):
        if self.trend == "ordinary":
            return OrdinaryTrend()
        if self.trend == "simple":
            return SimpleTrend(float(self.trend_mean))
        raise ValueError(f"trend must be 'ordinary' or 'simple', got {self.trend!r}")

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        design = Design(X)
        trend = self._trend()
        if self.kernel_spec is not None:
            spec = self.kernel_spec
            if isinstance(spec, dict):
                spec = KernelSpec.from_dict(spec)
            self.spec_ = spec
            self.log_likelihood_ = None
            self.degenerate_ = False
        else:
            cfg = FitConfig(
                n_starts=self.n_starts,
                max_evals=self.max_evals,
                seed=self.random_state,
                isotropic=self.isotropic,
                noise_bounds=tuple(self.noise_bounds),
            )
            result = mle_fit(self.family, self.structure, design, y, trend, cfg)
            self.spec_ = result.spec
            self.log_likelihood_ = result.log_likelihood
            self.degenerate_ = result.degenerate
        self.model_ = krig_fit(self.spec_, design, y, trend)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "model_")
        X = check_array(X)
        mean = self.model_.predict_mean(X)
        if not return_std:
            return mean
        return mean, np.sqrt(self.model_.predict_var(X))
