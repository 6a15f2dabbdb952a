import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from addkrig.estimator import KrigingRegressor
from addkrig.kernels import KernelSpec


def smooth_data(seed=0, n=40, d=2):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, d))
    y = np.sin(2 * np.pi * X[:, 0]) + 0.5 * X[:, 1] ** 2
    return X, y


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        est = KrigingRegressor(n_starts=2, max_evals=150, random_state=3)
        params = est.get_params()
        assert params["n_starts"] == 2
        assert params["structure"] == "additive"
        est2 = KrigingRegressor().set_params(**params)
        assert est2.get_params() == params

    def test_clone(self):
        est = KrigingRegressor(family="se", n_starts=1, max_evals=100)
        dup = clone(est)
        assert dup.get_params() == est.get_params()

    def test_predict_before_fit_raises(self):
        with pytest.raises(NotFittedError):
            KrigingRegressor().predict(np.array([[0.5, 0.5]]))


class TestFitPredict:
    def test_interpolates_smooth_data(self):
        X, y = smooth_data()
        est = KrigingRegressor(family="se", n_starts=2, max_evals=400,
                               random_state=0)
        est.fit(X, y)
        assert est.n_features_in_ == 2
        assert est.score(X, y) > 0.99
        pred = est.predict(X)
        assert pred.shape == (40,)

    def test_return_std(self):
        X, y = smooth_data(seed=1, n=25)
        est = KrigingRegressor(family="se", n_starts=1, max_evals=300,
                               random_state=1).fit(X, y)
        mean, std = est.predict(X, return_std=True)
        assert mean.shape == std.shape == (25,)
        assert np.all(std >= 0.0)
        # held-out points carry more uncertainty than training points
        hold = np.random.default_rng(5).uniform(size=(25, 2))
        _, std_hold = est.predict(hold, return_std=True)
        assert std_hold.mean() > std.mean()

    def test_fixed_kernel_spec_skips_the_search(self):
        X, y = smooth_data(seed=2, n=20)
        spec = KernelSpec.additive("se", 0.4, variance=1.0, noise=1e-4, dim=2)
        est = KrigingRegressor(kernel_spec=spec).fit(X, y)
        assert est.log_likelihood_ is None
        assert est.spec_ is spec
        assert est.score(X, y) > 0.9

    def test_degenerate_flag_propagates(self):
        X, _ = smooth_data(seed=3, n=15)
        est = KrigingRegressor(n_starts=1, max_evals=120, random_state=0)
        est.fit(X, np.full(15, 1.5))
        assert est.degenerate_
        np.testing.assert_allclose(est.predict(X), 1.5, atol=1e-6)

    def test_random_state_reproducible(self):
        X, y = smooth_data(seed=4, n=20)
        a = KrigingRegressor(n_starts=2, max_evals=200, random_state=7).fit(X, y)
        b = KrigingRegressor(n_starts=2, max_evals=200, random_state=7).fit(X, y)
        np.testing.assert_array_equal(a.spec_.ranges, b.spec_.ranges)
        assert a.log_likelihood_ == b.log_likelihood_

    def test_rejects_points_outside_the_unit_cube(self):
        X, y = smooth_data(seed=5, n=10)
        X[0, 0] = 1.7
        with pytest.raises(ValueError):
            KrigingRegressor(n_starts=1, max_evals=50).fit(X, y)

    def test_simple_trend_with_given_mean(self):
        X, y = smooth_data(seed=6, n=20)
        est = KrigingRegressor(trend="simple", trend_mean=0.0, n_starts=1,
                               max_evals=200, random_state=0).fit(X, y)
        assert est.model_.trend_estimate == 0.0
