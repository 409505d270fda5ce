"""Stratification, marginal stratum effects, percentage bias."""

import numpy as np
import pytest

from survhte import DgpParams, generate_cohort, mcate, pct_bias, stratify
from survhte.exceptions import (DegenerateDenominator, EmptyStratum,
                                InvalidBreaks)
from survhte.tmle import TargetedFit

from conftest import make_cohort


def fake_targeted(psi):
    """TargetedFit carrying a fixed effect surface, one-period s-curves."""
    n, theta = psi.shape
    return TargetedFit(hazards={}, survival={1: 0.5 + psi / 2, 0: 0.5 - psi / 2},
                       eic={0: np.zeros((n, theta)), 1: np.zeros((n, theta))},
                       steps=0, converged=True, max_steps_exceeded=False,
                       final_score={}, tolerance={})


class TestStratify:
    def test_uniform_feature_equal_width_sizes(self):
        cohort, _ = generate_cohort(DgpParams(n=3000, d=8, beta=0.5, r=100.0,
                                              seed=9))
        strata = stratify(cohort, feature=1, q=10)
        assert len(strata) == 10
        sizes = np.array([s.size for s in strata])
        assert sizes.sum() == 3000
        assert abs(sizes - 300).max() < 5 * np.sqrt(3000 * 0.1 * 0.9)

    def test_single_stratum_is_whole_cohort(self):
        cohort = make_cohort(n=50)
        strata = stratify(cohort, feature=0, q=1)
        assert len(strata) == 1
        assert strata[0].size == 50

    def test_binary_feature_two_strata(self):
        cohort = make_cohort(n=60, dim=2)
        x = cohort.x.copy()
        x[:, 1] = (x[:, 1] > 0.5).astype(float)
        cohort = type(cohort)(ids=cohort.ids, x=x, a=cohort.a,
                              t_obs=cohort.t_obs, y=cohort.y,
                              horizon=cohort.horizon,
                              feature_names=cohort.feature_names)
        strata = stratify(cohort, feature=1, q=10)
        assert len(strata) == 2
        assert {s.label for s in strata} == {"x2=0", "x2=1"}

    def test_explicit_breaks(self):
        cohort = make_cohort(n=100)
        strata = stratify(cohort, feature=0, breaks=[0.0, 0.25, 1.0])
        assert len(strata) == 2
        assert strata[0].hi == 0.25

    def test_invalid_breaks_rejected(self):
        cohort = make_cohort(n=20)
        with pytest.raises(InvalidBreaks):
            stratify(cohort, feature=0, breaks=[0.5, 0.5])
        with pytest.raises(InvalidBreaks):
            stratify(cohort, feature=7, q=4)

    def test_partition_property(self):
        cohort = make_cohort(n=200, dim=3, seed=12)
        strata = stratify(cohort, feature=2, q=7)
        seen = np.concatenate([s.members for s in strata])
        assert sorted(seen.tolist()) == list(range(200))


class TestMcate:
    def test_mean_of_member_effects(self):
        psi = np.array([[-0.1], [-0.2], [-0.6]])
        fit = fake_targeted(psi)
        stratum = type("S", (), {"members": np.array([0, 1]), "size": 2,
                                 "label": "s"})()
        assert mcate(fit, stratum, 1) == pytest.approx(-0.15)

    def test_single_member(self):
        psi = np.array([[-0.1], [-0.4]])
        fit = fake_targeted(psi)
        stratum = type("S", (), {"members": np.array([1]), "size": 1,
                                 "label": "s"})()
        assert mcate(fit, stratum, 1) == pytest.approx(-0.4)

    def test_empty_stratum_raises(self):
        fit = fake_targeted(np.zeros((3, 1)))
        stratum = type("S", (), {"members": np.array([], dtype=int),
                                 "size": 0, "label": "s"})()
        with pytest.raises(EmptyStratum):
            mcate(fit, stratum, 1)

    def test_whole_cohort_stratum_is_ate(self):
        rng = np.random.default_rng(3)
        psi = rng.uniform(-0.5, 0, size=(40, 3))
        fit = fake_targeted(psi)
        stratum = type("S", (), {"members": np.arange(40), "size": 40,
                                 "label": "all"})()
        assert mcate(fit, stratum, 2) == pytest.approx(psi[:, 1].mean())

    def test_size_weighted_strata_reconstruct_ate(self):
        cohort = make_cohort(n=500, dim=2, seed=8)
        rng = np.random.default_rng(5)
        psi = rng.uniform(-0.4, 0.1, size=(500, 4))
        fit = fake_targeted(psi)
        strata = stratify(cohort, feature=0, q=10)
        for t in range(1, 5):
            weighted = sum(s.size * mcate(fit, s, t) for s in strata) / 500
            assert weighted == pytest.approx(psi[:, t - 1].mean(), abs=1e-10)


class TestPctBias:
    def test_hand_value(self):
        assert pct_bias(-0.10, -0.08) == pytest.approx(0.20)

    def test_exact_estimate_zero_bias(self):
        assert pct_bias(-0.3, -0.3) == 0.0

    def test_degenerate_estimate(self):
        with pytest.raises(DegenerateDenominator):
            pct_bias(0.0, 0.1)

    def test_sign_flip_invariance(self):
        assert pct_bias(-0.2, -0.15) == pytest.approx(pct_bias(0.2, 0.15))
