"""Knee detection, scoring, selection, and selection accuracy metrics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survhte import (knee_point, ppv_tpr, score_features, select_features,
                     bootstrap_stability)
from survhte.exceptions import NoKnee
from survhte.importance import IMPORTANCE_METHODS
from survhte.learners import BaseLearnerSpec

from conftest import make_cohort


class TestKneedle:
    def test_hand_derived_example(self):
        assert knee_point([10, 9.5, 9, 2, 1.8, 1.6]) == 3

    def test_straight_line_has_no_knee(self):
        with pytest.raises(NoKnee):
            knee_point([6, 5, 4, 3, 2, 1])

    def test_constant_scores_have_no_knee(self):
        with pytest.raises(NoKnee):
            knee_point([1.0, 1.0, 1.0, 1.0])

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 50), st.floats(-5, 5))
    def test_scale_invariance(self, c, b):
        scores = np.array([10, 9.5, 9, 2, 1.8, 1.6])
        assert knee_point(c * scores + b) == knee_point(scores)

    def test_requires_three_points(self):
        with pytest.raises(NoKnee):
            knee_point([2.0, 1.0])

    def test_rejects_ascending_input(self):
        with pytest.raises(ValueError):
            knee_point([1, 2, 3, 4])

    def test_single_dominant_score(self):
        assert knee_point([0.7, 0.12, 0.06, 0.05, 0.03, 0.01]) == 1


def _curve(scores, method="elastic_net"):
    from survhte.importance import ImportanceCurve

    scores = np.asarray(scores, dtype=np.float64)
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ImportanceCurve(method=method, scores=scores, ranks=ranks)


class TestSelection:
    def test_selects_through_the_knee(self):
        result = select_features(_curve([10, 9.5, 9, 2, 1.8, 1.6]))
        assert result.knee_rank == 3
        assert set(result.selected) == {0, 1, 2}

    def test_no_knee_gives_empty_flagged_selection(self):
        result = select_features(_curve([6, 5, 4, 3, 2, 1]))
        assert result.no_knee
        assert result.selected == ()

    def test_all_zero_scores_select_nothing(self):
        result = select_features(_curve([0.0, 0.0, 0.0, 0.0]))
        assert result.selected == ()


class TestScoreFeatures:
    @pytest.mark.parametrize("method", IMPORTANCE_METHODS)
    def test_signal_feature_ranks_first(self, method):
        rng = np.random.default_rng(12)
        x = rng.random((900, 6))
        psi = 3.0 * x[:, 4] + 0.01 * rng.standard_normal(900)
        params = {"bayes_tree_ensemble": {"n_trees": 40, "n_burn": 40,
                                          "n_draws": 40},
                  "regression_forest": {"n_trees": 80}}.get(method)
        curve = score_features(psi, x, method, rng, params)
        assert curve.ranks[4] == 1
        assert (curve.scores >= 0).all()
        assert sorted(curve.ranks) == list(range(1, 7))

    def test_constant_effect_zero_lasso_scores(self):
        rng = np.random.default_rng(13)
        x = rng.random((300, 5))
        psi = np.full(300, -0.25)
        curve = score_features(psi, x, "adaptive_lasso", rng)
        np.testing.assert_allclose(curve.scores, 0.0, atol=1e-10)

    def test_rank_ties_break_by_feature_index(self):
        curve = _curve([0.5, 0.5, 0.1])
        assert list(curve.ranks) == [1, 2, 3]

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            score_features(np.zeros(10), np.zeros((10, 2)), "pca", None)


class TestPpvTpr:
    def test_mixed_selection(self):
        ppv, tpr, hits = ppv_tpr([0, 1, 5], range(5))
        assert ppv == pytest.approx(2 / 3)
        assert tpr == pytest.approx(2 / 5)
        assert hits == {0: 1, 1: 1, 2: 0, 3: 0, 4: 0}

    def test_empty_selection(self):
        ppv, tpr, hits = ppv_tpr([], range(5))
        assert (ppv, tpr) == (0.0, 0.0)

    def test_perfect_selection(self):
        ppv, tpr, _ = ppv_tpr(range(5), range(5))
        assert (ppv, tpr) == (1.0, 1.0)

    def test_bounds_and_counts(self):
        ppv, tpr, hits = ppv_tpr([0, 7, 8, 9], range(5))
        assert 0 <= ppv <= 1 and 0 <= tpr <= 1
        assert sum(hits.values()) == 1


@pytest.fixture(scope="module")
def counts():
    cohort = make_cohort(n=120, dim=3, horizon=5, seed=2, event_share=0.7)
    specs = [BaseLearnerSpec("elastic_net_logistic",
                             {"n_lambda": 12, "cv_folds": 3})]
    return bootstrap_stability(
        cohort, ["elastic_net"], b=3, m=100, seed=5, learner_specs=specs)


class TestBootstrapStability:
    def test_counts_bounded_by_replicates(self, counts):
        assert (counts["counts"]["elastic_net"] <= 3).all()
        assert (counts["counts"]["elastic_net"] >= 0).all()
        assert counts["replicates"] == 3

    def test_single_replicate_counts_binary(self):
        cohort = make_cohort(n=120, dim=3, horizon=5, seed=3, event_share=0.7)
        specs = [BaseLearnerSpec("elastic_net_logistic",
                                 {"n_lambda": 12, "cv_folds": 3})]
        out = bootstrap_stability(cohort, ["elastic_net"], b=1, m=80, seed=6,
                                  learner_specs=specs)
        assert set(np.unique(out["counts"]["elastic_net"])) <= {0, 1}

    def test_sample_size_validated(self):
        cohort = make_cohort(n=50)
        with pytest.raises(ValueError):
            bootstrap_stability(cohort, ["elastic_net"], b=1, m=51, seed=0)
