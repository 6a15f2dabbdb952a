import csv
import json

import numpy as np
import pytest

from addkrig.benchmarks import (
    EffectOverlay,
    ExperimentRecord,
    GFunction,
    derive_seed,
    fig_add_vs_sep,
    fig_p_collapse,
    fig_q2_quartiles,
    main_effect_overlay,
    p_criterion,
    q2,
    run_add_vs_sep,
    run_gfun_benchmark,
    run_p_collapse,
    save_fig_csv,
    save_records,
    solve_a1,
)
from addkrig.design import Design, DesignKind, DoeConfig, generate
from addkrig.kernels import KernelSpec, gram_matrix
from addkrig.likelihood import FitConfig


class TestGFunction:
    def test_center_and_corner_values(self):
        g = GFunction(a=np.array([1.0, 2.0]))
        x = np.array([0.5, 0.5])
        np.testing.assert_allclose(g(x), (1.0 / 2.0) * (2.0 / 3.0), rtol=1e-14)
        np.testing.assert_allclose(g(np.zeros(2)), (3.0 / 2.0) * (4.0 / 3.0), rtol=1e-14)

    def test_large_coefficients_freeze_the_factor(self):
        g = GFunction(a=np.array([1e9, 1.0]))
        x = np.array([0.1, 0.3])
        expected = (abs(4 * 0.3 - 2) + 1.0) / 2.0
        np.testing.assert_allclose(g(x), expected, rtol=1e-8)

    def test_batch_evaluation(self):
        g = GFunction(a=np.array([1.0, 2.0, 3.0]))
        rng = np.random.default_rng(0)
        xs = rng.uniform(size=(50, 3))
        vals = g(xs)
        assert vals.shape == (50,)
        np.testing.assert_allclose(vals[7], g(xs[7]), rtol=1e-14)

    def test_unit_mean(self):
        # E[g(X)] = 1 for uniform X, any coefficients
        g = GFunction(a=np.array([0.5, 3.0]))
        rng = np.random.default_rng(1)
        vals = g(rng.uniform(size=(200000, 2)))
        assert abs(vals.mean() - 1.0) < 5e-3

    def test_validation(self):
        with pytest.raises(ValueError):
            GFunction(a=np.array([1.0, -0.5]))
        with pytest.raises(ValueError):
            GFunction(a=np.array([]))
        g = GFunction(a=np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            g(np.array([0.5, 1.5]))
        with pytest.raises(ValueError):
            g(np.array([0.5]))


class TestSobolIndices:
    def test_two_equal_coefficients(self):
        # u = 1/12 each: S1 = (1/12) / ((13/12)^2 - 1) = 12/25
        g = GFunction(a=np.array([1.0, 1.0]))
        np.testing.assert_allclose(g.sobol_index(0), 12.0 / 25.0, rtol=1e-14)
        np.testing.assert_allclose(g.sobol_index(1), 12.0 / 25.0, rtol=1e-14)

    def test_single_dimension_explains_everything(self):
        g = GFunction(a=np.array([2.0]))
        np.testing.assert_allclose(g.sobol_index(0), 1.0, rtol=1e-14)

    def test_larger_coefficient_means_smaller_index(self):
        g = GFunction(a=np.array([0.5, 1.0, 5.0]))
        s = [g.sobol_index(i) for i in range(3)]
        assert s[0] > s[1] > s[2]

    def test_index_out_of_range(self):
        g = GFunction(a=np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            g.sobol_index(2)


class TestMainEffect:
    def test_shape_and_anchor_values(self):
        g = GFunction(a=np.array([1.0, 3.0]))
        # |4x-2| = 2 at x=0 and 0 at x=1/2
        np.testing.assert_allclose(g.main_effect(0, 0.0), 1.0 / 2.0, rtol=1e-14)
        np.testing.assert_allclose(g.main_effect(0, 0.5), -1.0 / 2.0, rtol=1e-14)
        np.testing.assert_allclose(g.main_effect(1, 0.5), -0.25, rtol=1e-14)

    def test_integrates_to_zero(self):
        # piecewise linear with the kink at 0.5 on the grid: trapezoid is exact
        g = GFunction(a=np.array([0.7, 2.0, 9.0]))
        grid = np.linspace(0.0, 1.0, 101)
        for i in range(3):
            assert abs(np.trapezoid(g.main_effect(i, grid), grid)) < 1e-12

    def test_matches_monte_carlo_conditional_mean(self):
        """E[g(X) | X_i = x] - 1 estimated by brute force."""
        g = GFunction(a=np.array([1.0, 2.0, 3.0, 4.0]))
        rng = np.random.default_rng(77)
        n = 400000
        xs = rng.uniform(size=(n, 4))
        for x1 in (0.0, 0.25, 0.5):
            xs_c = xs.copy()
            xs_c[:, 0] = x1
            vals = g(xs_c) - 1.0
            blocks = vals.reshape(10, -1).mean(axis=1)
            se = blocks.std(ddof=1) / np.sqrt(10)
            assert abs(vals.mean() - g.main_effect(0, x1)) < 4 * se


class TestSolveA1:
    def test_prescribed_sum_is_hit(self):
        for d in (5, 10, 20, 30):
            a1 = solve_a1(d, 0.75)
            g = GFunction(a=np.full(d, a1))
            total = sum(g.sobol_index(i) for i in range(d))
            np.testing.assert_allclose(total, 0.75, atol=1e-10)

    def test_frozen_values(self):
        np.testing.assert_allclose(solve_a1(5, 0.75), 0.5198752491996539, rtol=1e-12)
        np.testing.assert_allclose(solve_a1(10, 0.75), 1.3103558444267258, rtol=1e-12)
        np.testing.assert_allclose(solve_a1(20, 0.75), 2.3757235840283757, rtol=1e-12)
        np.testing.assert_allclose(solve_a1(30, 0.75), 3.177763542424734, rtol=1e-12)

    def test_monotone_in_dimension_and_target(self):
        a_by_d = [solve_a1(d, 0.75) for d in (3, 5, 10, 20)]
        assert all(b > a for a, b in zip(a_by_d, a_by_d[1:]))
        # growing a kills interactions faster than main effects, so pushing
        # the first-order sum toward 1 needs a larger coefficient
        assert solve_a1(10, 0.9) > solve_a1(10, 0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            solve_a1(1, 0.75)
        with pytest.raises(ValueError):
            solve_a1(10, 0.0)
        with pytest.raises(ValueError):
            solve_a1(10, 1.0)
        # at d=2 the first-order sum cannot drop below 6/7 for positive a
        with pytest.raises(ValueError):
            solve_a1(2, 0.75)


class TestQ2:
    def test_perfect_prediction(self):
        y = np.array([1.0, 2.0, 3.0])
        assert q2(y, y) == pytest.approx(1.0)

    def test_mean_prediction_scores_zero(self):
        y = np.array([1.0, 2.0, 3.0])
        assert q2(y, np.full(3, 2.0)) == pytest.approx(0.0)

    def test_worse_than_mean_goes_negative(self):
        y = np.array([1.0, 2.0, 3.0])
        pred = np.array([1.0, 2.0, 5.0])
        # SSE = 4 over sum of squared deviations 2
        assert q2(y, pred) == pytest.approx(-1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            q2(np.array([1.0, 1.0]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            q2(np.array([1.0, 2.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            q2(np.array([1.0]), np.array([1.0]))


SEP_SE = KernelSpec.separable("se", 0.5, variance=1.0, dim=2)


class TestPCriterion:
    def test_equals_one_when_test_is_design(self):
        design = generate(DoeConfig(DesignKind.LHS, n=5, d=2, seed=0))
        assert p_criterion(SEP_SE, design, design.points) == pytest.approx(1.0, abs=1e-9)

    def test_equals_zero_far_from_design(self):
        spec = KernelSpec.separable("se", 0.01, variance=1.0, dim=2)
        design = Design(np.array([[0.05, 0.05], [0.1, 0.08]]))
        test = np.array([[0.9, 0.9], [0.8, 0.95], [0.95, 0.7]])
        assert p_criterion(spec, design, test) == pytest.approx(0.0, abs=1e-12)

    def test_frozen_reference_value(self):
        """Pinned after cross-checking against a dense solve (below)."""
        design = generate(DoeConfig(DesignKind.LHS, n=20, d=2, seed=101))
        test = np.random.default_rng(202).uniform(size=(10000, 2))
        p = p_criterion(SEP_SE, design, test)
        np.testing.assert_allclose(p, 0.9969851156894485, rtol=1e-10)

    def test_matches_dense_conditional_variance(self):
        design = generate(DoeConfig(DesignKind.LHS, n=20, d=2, seed=101))
        test = np.random.default_rng(202).uniform(size=(500, 2))
        p = p_criterion(SEP_SE, design, test)
        K = gram_matrix(SEP_SE, design, include_noise=False)
        total = 0.0
        for t in test:
            k = np.array([
                np.prod(np.exp(-((t - row) / 0.5) ** 2)) for row in design.points
            ])
            total += 1.0 - k @ np.linalg.solve(K, k)
        expected = 1.0 - total / (1.0 * len(test))
        np.testing.assert_allclose(p, expected, rtol=1e-10)

    def test_invariant_under_test_point_shuffling(self):
        design = generate(DoeConfig(DesignKind.LHS, n=10, d=2, seed=3))
        test = np.random.default_rng(4).uniform(size=(200, 2))
        p1 = p_criterion(SEP_SE, design, test)
        p2 = p_criterion(SEP_SE, design, test[::-1])
        np.testing.assert_allclose(p1, p2, atol=1e-12)

    def test_additive_kernel_accepted(self):
        spec = KernelSpec.additive("se", 0.5, variance=1.0, dim=2)
        design = generate(DoeConfig(DesignKind.LHS, n=10, d=2, seed=5))
        test = np.random.default_rng(6).uniform(size=(100, 2))
        p = p_criterion(spec, design, test)
        assert 0.0 < p <= 1.0


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)

    def test_distinct_cells_get_distinct_seeds(self):
        seeds = {derive_seed(0, i, j) for i in range(4) for j in range(4)}
        assert len(seeds) == 16

    def test_index_order_matters(self):
        assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)


def toy_records():
    return [
        ExperimentRecord("demo", 2, 0, 0.5, "A", 0.25, 11),
        ExperimentRecord("demo", 2, 1, 0.5, "A", 0.35, 12),
        ExperimentRecord("demo", 3, 0, float("nan"), "B", 0.5, 13),
    ]


class TestRecordCsv:
    def test_schema_and_values(self, tmp_path):
        path = tmp_path / "records.csv"
        save_records(toy_records(), path, {"note": "unit"})
        lines = path.read_text().splitlines()
        assert lines[0] == "experiment,d,replicate,parameter,model_tag,criterion,seed"
        row = lines[1].split(",")
        assert row[0] == "demo" and row[1] == "2" and row[4] == "A"
        assert float(row[5]) == 0.25
        assert np.isnan(float(lines[3].split(",")[3]))

    def test_sidecar_metadata(self, tmp_path):
        path = tmp_path / "records.csv"
        save_records(toy_records(), path, {"note": "unit"})
        meta = json.loads((tmp_path / "records.meta.json").read_text())
        assert meta["rng"] == "numpy.random.PCG64"
        assert meta["note"] == "unit"
        assert "version" in meta

    def test_fig_csv(self, tmp_path):
        path = tmp_path / "fig.csv"
        save_fig_csv([{"d": 2, "P": 0.5}, {"d": 3, "P": 0.25}], ["d", "P"], path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["d", "P"]
        assert float(rows[1][1]) == 0.5


class TestPCollapseExperiment:
    def test_record_grid_and_determinism(self):
        recs = run_p_collapse([2, 3], [0.5, "sqrt"], n_test=50, seed=5, replicates=2)
        assert len(recs) == 8
        assert {r.model_tag for r in recs} == {"UKM"}
        assert {r.d for r in recs} == {2, 3}
        # 'sqrt' resolves to sqrt(d) in the parameter column
        sqrt_params = {r.d: r.parameter for r in recs if r.parameter > 0.6}
        np.testing.assert_allclose(sqrt_params[2], np.sqrt(2.0))
        np.testing.assert_allclose(sqrt_params[3], np.sqrt(3.0))
        again = run_p_collapse([2, 3], [0.5, "sqrt"], n_test=50, seed=5, replicates=2)
        assert [r.criterion for r in again] == [r.criterion for r in recs]

    def test_jobs_do_not_change_results(self):
        base = run_p_collapse([2, 3], [0.5], n_test=40, seed=6, replicates=2, jobs=1)
        par = run_p_collapse([2, 3], [0.5], n_test=40, seed=6, replicates=2, jobs=3)
        assert [(r.d, r.replicate, r.criterion) for r in base] == \
            [(r.d, r.replicate, r.criterion) for r in par]

    def test_fig_aggregation_averages_replicates(self):
        recs = [
            ExperimentRecord("p-collapse", 2, 0, 0.5, "UKM", 0.2, 1),
            ExperimentRecord("p-collapse", 2, 1, 0.5, "UKM", 0.4, 2),
        ]
        rows = fig_p_collapse(recs)
        assert rows == [{"d": 2, "theta": 0.5, "P": pytest.approx(0.3)}]

    def test_validation(self):
        with pytest.raises(ValueError):
            run_p_collapse([], [0.5], n_test=10, seed=0)
        with pytest.raises(ValueError):
            run_p_collapse([2], [0.5], n_test=0, seed=0)
        with pytest.raises(ValueError):
            run_p_collapse([2], ["cbrt"], n_test=10, seed=0)


class TestAddVsSepExperiment:
    def test_records_and_tags(self):
        recs = run_add_vs_sep([2, 4], n_test=60, seed=7, replicates=2)
        assert len(recs) == 8
        assert {r.model_tag for r in recs} == {"mA", "mS"}
        for r in recs:
            assert np.isnan(r.parameter)
            assert r.criterion <= 1.0 + 1e-9

    def test_additive_part_dominates_in_higher_dimension(self):
        recs = run_add_vs_sep([8], n_test=100, seed=8, replicates=1)
        by_tag = {r.model_tag: r.criterion for r in recs}
        assert by_tag["mA"] > by_tag["mS"]

    def test_fig_layout(self):
        recs = run_add_vs_sep([2], n_test=30, seed=9, replicates=2)
        rows = fig_add_vs_sep(recs)
        assert len(rows) == 1
        assert set(rows[0]) == {"d", "P_mA", "P_mS"}


class TestGfunBenchmark:
    CFG = FitConfig(n_starts=2, max_evals=250, seed=0)

    def test_records_and_determinism(self):
        recs = run_gfun_benchmark([3], replicates=2, n_test=80, seed=3, cfg=self.CFG)
        assert len(recs) == 4
        assert {r.model_tag for r in recs} == {"UKM", "AKM"}
        for r in recs:
            assert r.criterion <= 1.0 + 1e-12
            assert np.isnan(r.parameter)  # the column is only meaningful for p-collapse
        again = run_gfun_benchmark([3], replicates=2, n_test=80, seed=3, cfg=self.CFG)
        assert [r.criterion for r in again] == [r.criterion for r in recs]

    def test_fig_quartiles(self):
        recs = [
            ExperimentRecord("gfun-q2", 3, rep, 1.0, tag, val, 0)
            for rep, tag, val in [
                (0, "UKM", 0.1), (1, "UKM", 0.2), (2, "UKM", 0.3),
                (0, "AKM", 0.5), (1, "AKM", 0.7), (2, "AKM", 0.9),
            ]
        ]
        rows = fig_q2_quartiles(recs)
        akm = [r for r in rows if r["model"] == "AKM"][0]
        assert akm["q2_q50"] == pytest.approx(0.7)
        assert akm["q2_q25"] == pytest.approx(0.6)
        assert akm["q2_q75"] == pytest.approx(0.8)


class TestMainEffectOverlay:
    def test_analytic_column_and_shapes(self):
        overlay = main_effect_overlay(3, seed=2, grid_size=21,
                                      cfg=FitConfig(n_starts=3, max_evals=800, seed=0))
        assert isinstance(overlay, EffectOverlay)
        assert overlay.grid.shape == (21,)
        g = GFunction(a=np.full(3, solve_a1(3, 0.75)))
        np.testing.assert_allclose(overlay.analytic, g.main_effect(0, overlay.grid),
                                   rtol=1e-12)
        assert np.all(np.isfinite(overlay.mean))
        # the fitted first-dimension curve tracks the analytic effect
        corr = np.corrcoef(overlay.mean, overlay.analytic)[0, 1]
        assert corr > 0.8
