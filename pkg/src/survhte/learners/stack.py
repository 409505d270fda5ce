"""Cross-validated stacking of binary-outcome learners.

Every base learner produces out-of-fold probability predictions on a
shared fold partition; simplex weights minimizing the Bernoulli log loss
of the convex combination are found by exponentiated gradient descent,
and each learner is refit on the full sample for prediction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import AllLearnersFailed, SingularFitError
from .base import (BaseLearnerSpec, clamp_probability, kfold_indices,
                   log_loss)

EG_MAX_ITER = 5000
EG_TOL = 1e-8


def _simplex_weights(pred: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimize log loss of a convex combination by exponentiated gradient.

    The loss is convex over the simplex; after convergence every vertex
    is checked so the stack is never worse than its best single learner.
    """
    n, k = pred.shape
    if k == 1:
        return np.ones(1)
    p = clamp_probability(pred)
    w = np.full(k, 1.0 / k)

    def loss(wv):
        return log_loss(y, p @ wv)

    cur = loss(w)
    step = 1.0
    for _ in range(EG_MAX_ITER):
        q = clamp_probability(p @ w)
        grad = -((y / q - (1.0 - y) / (1.0 - q)) @ p) / n
        grad = grad - grad @ w  # project out the direction that rescales w
        proposal = w * np.exp(-step * grad)
        proposal /= proposal.sum()
        new = loss(proposal)
        if new > cur - 1e-14:
            step *= 0.5
            if step < 1e-12 or np.abs(proposal - w).max() < EG_TOL:
                break
            continue
        w, cur = proposal, new
        step = min(step * 1.3, 1e3)
    vertex_losses = [loss(np.eye(k)[j]) for j in range(k)]
    best_vertex = int(np.argmin(vertex_losses))
    if vertex_losses[best_vertex] < cur - 1e-12:
        w = np.eye(k)[best_vertex]
    return w


@dataclass
class StackedModel:
    """Fitted stack: full-data base models, simplex weights, CV diagnostics."""

    models: list
    names: list
    weights: np.ndarray
    cv_loss: np.ndarray
    stack_cv_loss: float
    dropped: list

    def predict(self, x) -> np.ndarray:
        preds = np.column_stack([m.predict(x) for m in self.models])
        return clamp_probability(preds @ self.weights)


def predict_probability(model, x) -> np.ndarray:
    """Probability predictions clamped away from 0 and 1.

    Accepts a StackedModel or any fitted base learner.
    """
    return clamp_probability(model.predict(x))


def fit_super_learner(specs, x, y, folds: int = 10, seed: int | None = None,
                      rng: np.random.Generator | None = None,
                      roles=None) -> StackedModel:
    """Fit base learners with shared CV folds and stack them on the simplex.

    Learners raising SingularFitError are dropped (recorded in
    ``dropped``); AllLearnersFailed is raised when none survive. The fold
    partition is a deterministic function of the seed, so refits with the
    same seed reproduce weights bitwise. ``roles`` optionally labels the
    design columns (covariate / time_linear / time_indicator) for
    learners that treat them differently.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(seed or 0))
    n = len(y)
    n_folds = min(folds, n)
    fold_labels = kfold_indices(n, n_folds, rng)

    oof_cols, models, names, dropped = [], [], [], []
    for spec in specs:
        spec = spec if isinstance(spec, BaseLearnerSpec) else BaseLearnerSpec(**spec)
        learner = spec.build()
        sub_rng = np.random.default_rng(rng.integers(2**63))
        try:
            if hasattr(learner, "fit_with_folds"):
                oof, fitted = learner.fit_with_folds(x, y, fold_labels, sub_rng,
                                                     roles=roles)
            else:
                oof = np.empty(n)
                for f in range(n_folds):
                    tr = fold_labels != f
                    fold_learner = spec.build()
                    fold_learner.fit(x[tr], y[tr], rng=sub_rng, roles=roles)
                    oof[~tr] = fold_learner.predict(x[~tr])
                fitted = learner.fit(x, y, rng=sub_rng, roles=roles)
        except SingularFitError as exc:
            dropped.append((spec.kind, str(exc)))
            continue
        oof_cols.append(oof)
        models.append(fitted)
        names.append(spec.kind)
    if not models:
        raise AllLearnersFailed(f"all base learners failed: {dropped}")

    pred = clamp_probability(np.column_stack(oof_cols))
    weights = _simplex_weights(pred, y)
    cv_loss = np.array([log_loss(y, pred[:, j]) for j in range(pred.shape[1])])
    return StackedModel(models=models, names=names, weights=weights,
                        cv_loss=cv_loss,
                        stack_cv_loss=log_loss(y, pred @ weights),
                        dropped=dropped)
