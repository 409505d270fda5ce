"""Generator formulas against hand-computed values and distribution oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from survhte import (DgpParams, calibrate_rate, generate_cohort, tau,
                     true_ite, true_propensity, true_survival)
from survhte.exceptions import CalibrationError, DimensionError

D = 8


def unit_vec(**kv):
    x = np.zeros(D)
    for key, val in kv.items():
        x[int(key[1:]) - 1] = val
    return x


def test_tau_zero_covariates_control():
    assert tau(0, np.zeros(D), r=3.7) == 0.0


def test_tau_zero_covariates_treated():
    # only the (1 - 3*x2)^2 term survives at x = 0
    assert tau(1, np.zeros(D), r=10.0) == pytest.approx(0.1)


def test_tau_hand_value():
    x = unit_vec(x1=1, x2=1 / 3, x3=1, x4=1, x5=1)
    # treated part: 1 + 3 + 0 + 1 = 5; baseline sum: 4 + 1/3
    assert tau(1, x, r=1.0) == pytest.approx(5 + 4 + 1 / 3)


def test_tau_dimension_error():
    with pytest.raises(DimensionError):
        tau(1, np.zeros(4), r=1.0)


def test_true_survival_values():
    assert true_survival(0, np.zeros(D), 12, r=5.0) == 1.0
    assert true_survival(1, np.zeros(D), 1, r=10.0) == pytest.approx(
        np.exp(-0.1))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1),
       st.lists(st.floats(0, 1), min_size=D, max_size=D),
       st.integers(0, 30), st.floats(0.5, 500))
def test_true_survival_monotone_in_t(a, x, t, r):
    x = np.array(x)
    assert true_survival(a, x, t + 1, r) <= true_survival(a, x, t, r) + 1e-15


def test_true_ite_values():
    assert true_ite(np.zeros(D), 1, r=10.0) == pytest.approx(np.exp(-0.1) - 1)
    assert true_ite(np.zeros(D), 0, r=10.0) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=D, max_size=D),
       st.integers(1, 24), st.floats(0.5, 500))
def test_true_ite_nonpositive(x, t, r):
    assert true_ite(np.array(x), t, r) <= 1e-15


def test_true_propensity_values():
    assert true_propensity(np.zeros(D), beta=0.0) == pytest.approx(0.2)
    x = unit_vec(x1=1, x2=1)
    assert true_propensity(x, beta=0.5) == pytest.approx(1.25 / 2.25)
    assert true_propensity(x, beta=2.0) == pytest.approx(4.25 / 5.25)


def test_generate_deterministic():
    params = DgpParams(n=500, d=D, beta=0.5, r=100.0, seed=31)
    c1, t1 = generate_cohort(params)
    c2, t2 = generate_cohort(params)
    np.testing.assert_array_equal(c1.x, c2.x)
    np.testing.assert_array_equal(c1.t_obs, c2.t_obs)
    np.testing.assert_array_equal(c1.a, c2.a)
    np.testing.assert_array_equal(t1.t_event, t2.t_event)


def test_generate_treated_fraction_beta0():
    params = DgpParams(n=40_000, d=D, beta=0.0, r=100.0, seed=8)
    cohort, _ = generate_cohort(params)
    se = np.sqrt(0.2 * 0.8 / cohort.n)
    assert abs(cohort.a.mean() - 0.2) < 3 * se


N_MARGINALS = 100_000


@pytest.fixture(scope="module")
def sample():
    params = DgpParams(n=N_MARGINALS, d=D, beta=0.5, r=150.0, seed=99)
    return generate_cohort(params)


class TestMarginals:
    """Kolmogorov-Smirnov checks of each generated marginal at alpha=0.001."""

    N = N_MARGINALS
    ALPHA = 1e-3

    def test_continuous_covariates_uniform(self, sample):
        cohort, _ = sample
        for j in (0, 1, 2, 4, 5):
            p = stats.kstest(cohort.x[:, j], "uniform").pvalue
            assert p > self.ALPHA, f"x{j + 1} fails uniform KS"

    def test_binary_covariate(self, sample):
        cohort, _ = sample
        assert set(np.unique(cohort.x[:, 3])) == {0.0, 1.0}
        p = stats.binomtest(int(cohort.x[:, 3].sum()), self.N, 0.5).pvalue
        assert p > self.ALPHA

    def test_event_times_exponential(self, sample):
        cohort, truth = sample
        rate = tau(cohort.a, cohort.x, truth.params.r)
        ok = rate > 0
        u = 1.0 - np.exp(-rate[ok] * truth.t_event[ok])
        assert stats.kstest(u, "uniform").pvalue > self.ALPHA

    def test_censor_times_weibull(self, sample):
        cohort, truth = sample
        shape = 1.0 + 0.2 * cohort.x[:, 0]
        u = 1.0 - np.exp(-((truth.t_censor / 50.0) ** shape))
        assert stats.kstest(u, "uniform").pvalue > self.ALPHA

    def test_treatment_follows_odds_model(self, sample):
        cohort, _ = sample
        p = true_propensity(cohort.x, 0.5)
        bins = np.quantile(p, np.linspace(0, 1, 11))
        idx = np.clip(np.searchsorted(bins, p) - 1, 0, 9)
        for b in range(10):
            mask = idx == b
            se = np.sqrt(p[mask].mean() * (1 - p[mask].mean()) / mask.sum())
            assert abs(cohort.a[mask].mean() - p[mask].mean()) < 5 * se

    def test_observed_time_is_ceiled_minimum(self, sample):
        cohort, truth = sample
        expect = np.maximum(np.ceil(np.minimum(truth.t_event, truth.t_censor)),
                            1).astype(int)
        np.testing.assert_array_equal(cohort.t_obs, expect)
        np.testing.assert_array_equal(cohort.y,
                                      (truth.t_event <= truth.t_censor))


class TestCalibration:
    def test_self_consistency(self):
        params = DgpParams(n=1, d=10, beta=0.5, target_rate=0.10, seed=0)
        r = calibrate_rate(0.10, params)
        regen = DgpParams(n=100_000, d=10, beta=0.5, r=r, seed=424)
        _, truth = generate_cohort(regen)
        assert abs(truth.event_rate() - 0.10) < 0.01

    def test_monotone_in_target(self):
        params = DgpParams(n=1, d=10, beta=0.5, target_rate=0.10, seed=0)
        assert calibrate_rate(0.025, params) > calibrate_rate(0.20, params)

    def test_unreachable_target(self):
        params = DgpParams(n=1, d=10, beta=0.5, target_rate=0.10, seed=0)
        with pytest.raises(CalibrationError):
            calibrate_rate(0.9999, params)

    def test_generate_resolves_target_rate(self):
        params = DgpParams(n=200, d=D, beta=0.5, target_rate=0.2, seed=3)
        cohort, truth = generate_cohort(params)
        assert truth.params.r is not None and truth.params.r > 0
