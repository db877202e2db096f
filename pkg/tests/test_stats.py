"""Statistical kernels vs independent oracles.

The frozen expected values below were produced by the oracle functions in
this file (brute-force ECDF scan, numerical integration of the t density,
literal hand formulas); the implementation never shares code with them.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ema_trigger.stats import (
    DegenerateInputError,
    abs_z_transform,
    classification_metrics,
    fit_random_intercept_lmm,
    gls_fixed_effects,
    j_vs_pa_curve,
    kolmogorov_sf,
    ks_two_sample,
    paired_t_test,
    regression_metrics,
    repeated_measures_f,
)


def ecdf_scan_d(a, b):
    """Brute-force KS statistic: evaluate both ECDFs at every pooled point."""
    d = 0.0
    for x in sorted(list(a) + list(b)):
        fa = sum(1 for v in a if v <= x) / len(a)
        fb = sum(1 for v in b if v <= x) / len(b)
        d = max(d, abs(fa - fb))
    return d


class TestPairedT:
    A = [5.1, 4.8, 6.0, 5.6, 4.9, 5.3, 5.8, 5.2, 4.7, 5.5]
    B = [4.6, 4.9, 5.4, 5.1, 4.5, 5.3, 5.0, 4.8, 4.4, 5.2]

    def test_matches_integration_oracle(self):
        # frozen from the quad integration of the explicit t density (n=10)
        res = paired_t_test(self.A, self.B)
        assert res.t == pytest.approx(4.38423640571017, abs=1e-9)
        assert res.p == pytest.approx(0.0017602406651493398, abs=1e-6)
        assert res.df == 9

    def test_swap_negates_t_preserves_p(self):
        r1 = paired_t_test(self.A, self.B)
        r2 = paired_t_test(self.B, self.A)
        assert r2.t == pytest.approx(-r1.t, abs=1e-12)
        assert r2.p == pytest.approx(r1.p, abs=1e-12)

    def test_zero_variance_errors(self):
        with pytest.raises(DegenerateInputError):
            paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])

    def test_too_short_errors(self):
        with pytest.raises(DegenerateInputError):
            paired_t_test([1.0], [2.0])


class TestKs:
    def test_identical_samples_d_zero(self):
        res = ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert res.d == 0.0
        assert res.p == 1.0

    def test_disjoint_supports_d_one(self):
        res = ks_two_sample([0.0, 0.1, 0.2], [5.0, 5.1])
        assert res.d == 1.0

    def test_fixture_matches_scan_oracle(self):
        a = [0.1, 0.4, 0.7, 1.2, 1.5, 2.0]
        b = [0.3, 0.5, 0.9, 1.1, 1.4, 1.8, 2.2]
        res = ks_two_sample(a, b)
        # frozen from ecdf_scan_d + fsum of the Kolmogorov series
        assert res.d == pytest.approx(0.2142857142857143, abs=1e-12)
        assert res.p == pytest.approx(0.9984084264792683, abs=1e-9)
        assert res.d == pytest.approx(ecdf_scan_d(a, b), abs=1e-12)

    @given(
        st.lists(st.integers(min_value=-50, max_value=50), min_size=2, max_size=40),
        st.lists(st.integers(min_value=-50, max_value=50), min_size=2, max_size=40),
    )
    @settings(max_examples=60, deadline=None)
    def test_d_invariant_under_monotone_transform(self, a, b):
        # x -> x^3 is strictly increasing and exact on small integers
        d_raw = ks_two_sample(a, b).d
        d_cube = ks_two_sample([x**3 for x in a], [x**3 for x in b]).d
        assert d_cube == pytest.approx(d_raw, abs=1e-12)

    def test_empty_sample_errors(self):
        with pytest.raises(DegenerateInputError):
            ks_two_sample([], [1.0])

    def test_sf_series_against_fsum(self):
        for lam in (0.2, 0.5, 1.0, 1.7):
            ref = math.fsum(
                2 * (-1) ** (k - 1) * math.exp(-2 * k * k * lam * lam)
                for k in range(1, 400)
            )
            assert kolmogorov_sf(lam) == pytest.approx(min(1.0, ref), abs=1e-12)


class TestLmm:
    def _ols(self, y, x):
        X = np.column_stack([np.ones_like(x), x])
        return np.linalg.solve(X.T @ X, X.T @ y)

    def test_single_group_equals_ols(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=60)
        y = 1.5 + 2.0 * x + 0.3 * rng.normal(size=60)
        fit = fit_random_intercept_lmm(y, x, np.zeros(60, dtype=int))
        beta = self._ols(y, x)
        assert fit.beta0 == pytest.approx(beta[0], abs=1e-6)
        assert fit.beta1 == pytest.approx(beta[1], abs=1e-6)
        assert fit.sigma_u2 == 0.0

    def test_gls_reduces_to_ols_as_lambda_vanishes(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=120)
        g = np.repeat(np.arange(6), 20)
        y = 0.5 + 1.2 * x + 0.8 * rng.normal(size=120)
        beta_gls = gls_fixed_effects(y, x, g, 1e-12)
        beta_ols = self._ols(y, x)
        assert np.allclose(beta_gls, beta_ols, atol=1e-4)

    def test_recovers_planted_effect(self):
        # beta = (1, 0.5), group intercept sd 1, noise sd 0.5, 50 groups x 20
        hits = 0
        ratios = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            groups = np.repeat(np.arange(50), 20)
            u = rng.normal(0.0, 1.0, size=50)[groups]
            x = rng.normal(size=groups.size)
            y = 1.0 + 0.5 * x + u + rng.normal(0.0, 0.5, size=groups.size)
            fit = fit_random_intercept_lmm(y, x, groups)
            if abs(fit.beta1 - 0.5) <= 3 * fit.se_beta1:
                hits += 1
            ratios.append(fit.sigma_u2 / fit.sigma_e2)
        assert hits == 20
        true_ratio = 1.0 / 0.25
        assert abs(np.mean(ratios) - true_ratio) / true_ratio < 0.30

    def test_constant_x_errors(self):
        with pytest.raises(DegenerateInputError, match="rank-deficient"):
            fit_random_intercept_lmm([1.0, 2.0, 3.0, 4.0], [1.0, 1.0, 1.0, 1.0], [0, 0, 1, 1])

    def test_wald_p_small_for_strong_effect(self):
        rng = np.random.default_rng(5)
        groups = np.repeat(np.arange(10), 30)
        x = rng.normal(size=300)
        y = 2.0 * x + rng.normal(0.0, 1.0, size=300) + rng.normal(size=10)[groups]
        fit = fit_random_intercept_lmm(y, x, groups)
        assert fit.p < 1e-6
        assert fit.ci_low < fit.beta1 < fit.ci_high


class TestRepeatedMeasuresF:
    def test_f_equals_t_squared(self):
        rng = np.random.default_rng(6)
        a = rng.normal(1.0, 0.5, size=15)
        b = rng.normal(0.7, 0.5, size=15)
        t = paired_t_test(a, b)
        f = repeated_measures_f(np.column_stack([a, b]))
        assert f.f == pytest.approx(t.t**2, rel=1e-12)
        assert f.p == pytest.approx(t.p, rel=1e-12)

    def test_missing_condition_excluded(self):
        pairs = np.array([[1.0, 0.5], [np.nan, 0.4], [0.9, 0.2], [1.1, 0.7]])
        res = repeated_measures_f(pairs)
        assert res.n_pairs == 3
        assert res.n_excluded == 1

    def test_identical_conditions_error(self):
        pairs = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        with pytest.raises(DegenerateInputError):
            repeated_measures_f(pairs)


class TestAbsZ:
    def test_value_at_group_mean_is_zero(self):
        z = abs_z_transform([2.0, 4.0, 3.0], [0, 0, 0])
        assert z[2] == pytest.approx(0.0, abs=1e-12)

    def test_one_sd_above_mean(self):
        vals = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        sd = vals.std(ddof=1)
        z = abs_z_transform(np.append(vals, 3.0 + sd), np.zeros(6))
        # oracle: direct |x - mean|/sd on the 6-point group
        full = np.append(vals, 3.0 + sd)
        expect = abs(full - full.mean()) / full.std(ddof=1)
        assert np.allclose(z, expect, atol=1e-12)

    def test_constant_group_masked(self):
        z = abs_z_transform([1.0, 1.0, 2.0, 4.0], [0, 0, 1, 1])
        assert np.isnan(z[0]) and np.isnan(z[1])
        assert np.isfinite(z[2]) and np.isfinite(z[3])


class TestCurve:
    def test_constant_j_flat(self):
        curve = j_vs_pa_curve(np.ones(50), np.linspace(5, 25, 50), bins=5)
        filled = curve["mean_j"][curve["count"] > 0]
        assert np.allclose(filled, 1.0)

    def test_u_shape_from_constructed_j(self):
        rng = np.random.default_rng(7)
        pa = rng.normal(15.0, 4.0, size=2000)
        j = np.abs(pa - pa.mean())
        curve = j_vs_pa_curve(j, pa, bins=9)
        mean_j = curve["mean_j"]
        # endpoints above the central bin
        assert mean_j[0] > mean_j[4]
        assert mean_j[-1] > mean_j[4]

    def test_empty_bin_masked(self):
        curve = j_vs_pa_curve([1.0, 2.0], [0.0, 10.0], bins=5)
        assert (curve["count"] == 0).any()
        assert np.isnan(curve["mean_j"][curve["count"] == 0]).all()


class TestClassificationMetrics:
    def test_perfect_predictions(self):
        m = classification_metrics([0, 1, 1, 0], [0, 1, 1, 0])
        assert m["accuracy"] == 1.0
        assert m["f1_weighted"] == 1.0
        assert m["precision_weighted"] == 1.0

    def test_confusion_fixture(self):
        # TP=2, FP=1, FN=1, TN=6 (class 1 positive); hand formulas give 0.8
        # for accuracy and, by coincidence of the counts, for both weighted
        # metrics as well.
        y_true = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
        y_pred = [1, 1, 0, 1, 0, 0, 0, 0, 0, 0]
        m = classification_metrics(y_true, y_pred)
        assert m["accuracy"] == pytest.approx(0.8, abs=1e-12)
        assert m["f1_weighted"] == pytest.approx(0.8, abs=1e-9)
        assert m["precision_weighted"] == pytest.approx(0.8, abs=1e-9)

    def test_all_one_class_on_balanced_truth(self):
        m = classification_metrics([0, 1, 0, 1], [1, 1, 1, 1])
        assert m["accuracy"] == 0.5

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=50))
    @settings(max_examples=60, deadline=None)
    def test_invariant_under_label_swap(self, pairs):
        y_true = [p[0] for p in pairs]
        y_pred = [p[1] for p in pairs]
        m1 = classification_metrics(y_true, y_pred)
        m2 = classification_metrics([1 - v for v in y_true], [1 - v for v in y_pred])
        for key in m1:
            assert m1[key] == pytest.approx(m2[key], abs=1e-12)

    def test_empty_errors(self):
        with pytest.raises(DegenerateInputError):
            classification_metrics([], [])


class TestRegressionMetrics:
    def test_perfect_fit(self):
        rmse, r2 = regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert rmse == 0.0
        assert r2 == 1.0

    def test_mean_prediction_r2_zero(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        rmse, r2 = regression_metrics(y, np.full(4, y.mean()))
        assert r2 == pytest.approx(0.0, abs=1e-12)

    def test_fixture_matches_direct_formula(self):
        y_true = [3.0, 4.5, 2.2, 5.1, 4.0, 3.3]
        y_pred = [2.8, 4.9, 2.0, 4.6, 4.4, 3.1]
        rmse, r2 = regression_metrics(y_true, y_pred)
        assert rmse == pytest.approx(0.3391164991562636, abs=1e-12)
        assert r2 == pytest.approx(0.8765284819564567, abs=1e-12)

    def test_constant_truth_masks_r2(self):
        rmse, r2 = regression_metrics([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
        assert math.isnan(r2)
        assert rmse > 0
