"""Feature discovery: score, rank, find the knee, select, and evaluate.

The estimated end-of-follow-up effect is regressed on the covariates
with four scorer families (two penalized linear, two tree ensembles);
each score curve is cut at its knee and everything ranked above the knee
counts as contributing to effect heterogeneity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .exceptions import FitError, NoKnee, SingularFitError
from .kneedle import knee_point
from .learners import (AdaptiveLassoRegression, ElasticNetRegression,
                       RegressionForest, SumOfTreesSampler)

IMPORTANCE_METHODS = (
    "adaptive_lasso",
    "elastic_net",
    "regression_forest",
    "bayes_tree_ensemble",
)


@dataclass(frozen=True)
class ImportanceCurve:
    """Scores with their descending-order ranks; ties break by feature index."""

    method: str
    scores: np.ndarray
    ranks: np.ndarray  # ranks[j] = rank of feature j, 1-based

    @property
    def order(self) -> np.ndarray:
        """Feature indices sorted best-first."""
        return np.argsort(self.ranks)

    def sorted_scores(self) -> np.ndarray:
        return self.scores[self.order]


@dataclass(frozen=True)
class SelectionResult:
    method: str
    selected: tuple
    knee_rank: int | None
    no_knee: bool
    curve: ImportanceCurve


def score_features(psi_at_horizon, x, method: str, rng,
                   scorer_params: dict | None = None) -> ImportanceCurve:
    """Variable-importance scores for one method.

    Linear scorers report absolute standardized coefficients at the
    CV-selected penalty; the regression forest reports depth-weighted
    split frequencies; the sum-of-trees sampler reports posterior split
    inclusion proportions.
    """
    if method not in IMPORTANCE_METHODS:
        raise ValueError(f"unknown importance method '{method}'")
    x = np.asarray(x, dtype=np.float64)
    psi = np.asarray(psi_at_horizon, dtype=np.float64)
    params = dict(scorer_params or {})
    try:
        if method == "adaptive_lasso":
            model = AdaptiveLassoRegression(**params).fit(x, psi, rng=rng)
            scores = np.abs(model.standardized_coef)
        elif method == "elastic_net":
            model = ElasticNetRegression(**params).fit(x, psi, rng=rng)
            scores = np.abs(model.standardized_coef)
        elif method == "regression_forest":
            model = RegressionForest(**params).fit(x, psi, rng=rng)
            scores = model.importance()
        else:
            model = SumOfTreesSampler(**params).fit(x, psi, rng=rng)
            scores = model.importance()
    except SingularFitError as exc:
        raise FitError(f"{method} scorer failed: {exc}") from exc
    if not np.all(np.isfinite(scores)):
        raise FitError(f"{method} scorer produced non-finite scores")
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ImportanceCurve(method=method, scores=scores, ranks=ranks)


def select_features(curve: ImportanceCurve) -> SelectionResult:
    """Features ranked at or before the knee; empty (flagged) when kneeless."""
    try:
        knee = knee_point(curve.sorted_scores())
    except NoKnee:
        return SelectionResult(method=curve.method, selected=(),
                               knee_rank=None, no_knee=True, curve=curve)
    chosen = tuple(int(j) for j in curve.order[:knee])
    return SelectionResult(method=curve.method, selected=chosen,
                           knee_rank=knee, no_knee=False, curve=curve)


def ppv_tpr(selected, true_features) -> tuple[float, float, dict]:
    """Positive predictive value, true positive rate, per-feature hits.

    Empty selections score zero on both (the undefined-PPV convention).
    """
    sel = set(int(j) for j in selected)
    truth = [int(j) for j in true_features]
    hits = {j: int(j in sel) for j in truth}
    tp = sum(hits.values())
    ppv = tp / len(sel) if sel else 0.0
    tpr = tp / len(truth) if truth else 0.0
    return float(ppv), float(tpr), hits


def bootstrap_stability(cohort: Cohort, methods, b: int, m: int, seed: int,
                        learner_specs=None, scorer_params=None,
                        on_error=None) -> dict:
    """Selection counts per feature over bootstrap reruns of steps 1 and 2.

    Each replicate draws ``m`` subjects with replacement, refits the
    outcome models, re-estimates effects at the horizon, rescores and
    reselects. Failed replicates are skipped and counted.
    """
    from .effects import estimate_ite, fit_outcome_models
    from .learners import default_specs

    if m > cohort.n:
        raise ValueError("bootstrap sample size m cannot exceed cohort size")
    if b < 1:
        raise ValueError("need at least one replicate")
    specs = learner_specs if learner_specs is not None else default_specs()
    methods = list(methods)
    counts = {meth: np.zeros(cohort.dim, dtype=np.int64) for meth in methods}
    failures = 0
    for rep in range(b):
        rep_seed = np.random.SeedSequence(entropy=seed, spawn_key=(rep,))
        rng = np.random.default_rng(rep_seed)
        rows = rng.integers(0, cohort.n, size=m)
        sample = cohort.subset(rows, id_suffix=f"_b{rep}")
        try:
            models = fit_outcome_models(sample, specs,
                                        seed=int(rng.integers(2**31)))
            surface = estimate_ite(models, sample)
            psi_theta = surface.psi_hat[:, -1]
            for k, meth in enumerate(methods):
                meth_rng = np.random.default_rng(np.random.SeedSequence(
                    entropy=seed, spawn_key=(rep, k + 1)))
                curve = score_features(psi_theta, sample.x, meth, meth_rng,
                                       (scorer_params or {}).get(meth))
                result = select_features(curve)
                for j in result.selected:
                    counts[meth][j] += 1
        except Exception as exc:  # replicate-level isolation
            failures += 1
            if on_error is not None:
                on_error(rep, exc)
    return {"counts": counts, "replicates": b, "failures": failures,
            "sample_size": m}
