"""Greedy hinge-term logistic learner (piecewise-linear adaptive fits).

Builds a design out of max(0, x_j - c) and max(0, c - x_j) columns one
term at a time: candidates are scored against the current working
gradient, the winner is added, and the model is refit by IRLS. With
``degree=2`` each accepted term also spawns product candidates with the
base hinges, so simple interactions are reachable. Stops when the
deviance stops improving or the term budget is exhausted.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import SingularFitError
from .base import check_matrix, expit

CUT_QUANTILES = np.linspace(0.1, 0.9, 9)


def _irls(design, y, ridge, max_iter=30):
    n, p = design.shape
    beta = np.zeros(p)
    penalty = ridge * n * np.eye(p)
    penalty[0, 0] = 0.0
    for _ in range(max_iter):
        eta = design @ beta
        prob = expit(eta)
        w = np.maximum(prob * (1.0 - prob), 1e-6)
        grad = design.T @ (y - prob) - penalty @ beta
        hess = (design * w[:, None]).T @ design + penalty
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularFitError(f"hinge IRLS solve failed: {exc}") from None
        beta += step
        if not np.isfinite(beta).all():
            raise SingularFitError("hinge IRLS diverged")
        if np.abs(step).max() < 1e-8:
            break
    prob = expit(design @ beta)
    prob_c = np.clip(prob, 1e-12, 1 - 1e-12)
    deviance = -2.0 * float(y @ np.log(prob_c) + (1 - y) @ np.log(1 - prob_c))
    return beta, deviance


class HingeLogistic:
    """Forward-selected hinge terms (optionally times one parent term).

    A term is ((j, cut, sign), parent) where parent indexes a previously
    accepted term or is None; the column is the hinge, multiplied by the
    parent's column when present.
    """

    def __init__(self, max_terms=10, ridge=1e-6, min_improvement=1e-4,
                 degree=2):
        self.max_terms = max_terms
        self.ridge = ridge
        self.min_improvement = min_improvement
        self.degree = degree

    def _base_candidates(self, x):
        cands = []
        for j in range(x.shape[1]):
            uniq = np.unique(x[:, j])
            if len(uniq) < 2:
                continue
            if len(uniq) == 2:
                cuts = [uniq.mean()]
            else:
                cuts = np.unique(np.quantile(x[:, j], CUT_QUANTILES))
                cuts = [c for c in cuts if uniq[0] < c < uniq[-1]]
            for c in cuts:
                cands.append((j, float(c), +1))
                cands.append((j, float(c), -1))
        return cands

    @staticmethod
    def _hinge_col(x, j, cut, sign):
        return np.maximum(0.0, sign * (x[:, j] - cut))

    def _term_col(self, x, term):
        (j, cut, sign), parent = term
        col = self._hinge_col(x, j, cut, sign)
        if parent is not None:
            col = col * self._term_cols_cache[parent]
        return col

    def fit(self, x, y, rng=None, fold_labels=None, roles=None):
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        self.dim_ = x.shape[1]
        base = self._base_candidates(x)
        if not base:
            self.terms_ = []
            self.beta_, _ = _irls(np.ones((len(y), 1)), y, self.ridge)
            return self
        # float32 is plenty for candidate scoring and halves the footprint
        base_matrix = np.column_stack(
            [self._hinge_col(x, *c) for c in base]).astype(np.float32)
        base_sq = base_matrix * base_matrix
        self.terms_ = []
        self._term_cols_cache = []
        design = np.ones((len(y), 1))
        beta, deviance = _irls(design, y, self.ridge)
        used = set()
        used_base = np.zeros(len(base), dtype=bool)
        while len(self.terms_) < self.max_terms:
            prob = expit(design @ beta)
            grad = (y - prob).astype(np.float32)
            w = np.maximum(prob * (1 - prob), 1e-6).astype(np.float32)
            num = np.abs(grad @ base_matrix)
            den = np.sqrt(w @ base_sq) + 1e-12
            score = np.where(used_base, -np.inf, num / den)
            best_pick = (int(np.argmax(score)), None)
            best_score = float(score[best_pick[0]])
            if self.degree >= 2 and self.terms_:
                # pair each accepted term with the currently strongest cuts
                top = np.argsort(score)[::-1][:32]
                top = top[np.isfinite(score[top])]
                for parent in range(len(self.terms_)):
                    pc = self._term_cols_cache[parent].astype(np.float32)
                    inter = base_matrix[:, top] * pc[:, None]
                    num_i = np.abs(grad @ inter)
                    den_i = np.sqrt(w @ (inter * inter)) + 1e-12
                    score_i = num_i / den_i
                    k = int(np.argmax(score_i))
                    if (int(top[k]), parent) not in used and \
                            score_i[k] > best_score:
                        best_pick = (int(top[k]), parent)
                        best_score = float(score_i[k])
            if not np.isfinite(best_score):
                break
            term = (base[best_pick[0]], best_pick[1])
            col = self._term_col(x, term)
            trial = np.column_stack([design, col])
            beta_new, dev_new = _irls(trial, y, self.ridge)
            used.add(best_pick)
            if best_pick[1] is None:
                used_base[best_pick[0]] = True
            if deviance - dev_new < self.min_improvement * max(deviance, 1.0):
                break
            design, beta, deviance = trial, beta_new, dev_new
            self.terms_.append(term)
            self._term_cols_cache.append(col)
        self.beta_ = beta
        del self._term_cols_cache
        return self

    def predict(self, x):
        x = check_matrix(x, self.dim_)
        cols = [np.ones((len(x), 1))]
        built = []
        for (j, cut, sign), parent in self.terms_:
            col = self._hinge_col(x, j, cut, sign)
            if parent is not None:
                col = col * built[parent]
            built.append(col)
            cols.append(col[:, None])
        return expit(np.hstack(cols) @ self.beta_)
