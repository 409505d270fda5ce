"""Logistic regression on natural cubic spline expansions.

Smooth additive analogue in the stack: every continuous feature is
expanded into a natural cubic basis (linear tails beyond the boundary
knots), binary and constant columns pass through untouched, and the
expanded design is fit by Newton/IRLS. The ridge level can be a fixed
value or chosen by cross-validation, which makes the learner behave
like a penalized additive model whose smoothness adapts to the data.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import SingularFitError
from .base import Standardizer, check_matrix, expit, kfold_indices, log_loss

RIDGE_GRID = (1e-8, 1e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1, 3e-1)


def natural_spline_basis(col: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Natural cubic spline basis (without intercept): linear + K-2 curved.

    Standard truncated-power construction with the second derivative
    forced to zero outside the boundary knots.
    """
    k = len(knots)
    cols = [col]
    if k < 3:
        return np.column_stack(cols)

    def d(j):
        num = np.maximum(col - knots[j], 0.0) ** 3 \
            - np.maximum(col - knots[-1], 0.0) ** 3
        return num / (knots[-1] - knots[j])

    d_last = d(k - 2)
    for j in range(k - 2):
        cols.append(d(j) - d_last)
    return np.column_stack(cols)


def _irls_ridge(design, y, ridge, max_iter):
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
            raise SingularFitError(f"spline IRLS solve failed: {exc}") from None
        beta += step
        if not np.isfinite(beta).all():
            raise SingularFitError("spline IRLS diverged")
        if np.abs(step).max() < 1e-8:
            break
    return beta


class SplineLogistic:
    """Additive logistic model with per-feature natural cubic splines.

    ``ridge`` is either a number or ``"cv"`` to pick the level from
    RIDGE_GRID by cross-validated log loss. When column roles are
    supplied and ``time_indicators="drop"`` the saturated per-period
    indicators are left out and the baseline comes from the splined
    linear time term instead.
    """

    def __init__(self, knots=5, ridge=1e-8, max_iter=15,
                 time_indicators="keep"):
        if time_indicators not in ("keep", "drop"):
            raise ValueError("time_indicators must be 'keep' or 'drop'")
        self.knots = knots
        self.ridge = ridge
        self.max_iter = max_iter
        self.time_indicators = time_indicators

    # -- basis ---------------------------------------------------------------

    def _column_mask(self, n_cols, roles):
        if roles is not None and self.time_indicators == "drop":
            return np.array([r != "time_indicator" for r in roles])
        return np.ones(n_cols, dtype=bool)

    def _make_knots(self, x):
        qs = np.linspace(0.05, 0.95, self.knots)
        out = []
        for j in range(x.shape[1]):
            uniq = np.unique(x[:, j])
            if len(uniq) <= 2:
                out.append(None)  # binary/constant: keep linear
                continue
            kn = np.unique(np.quantile(x[:, j], qs))
            out.append(kn if len(kn) >= 3 else None)
        return out

    def _expand(self, x, knots):
        pieces = []
        for j, kn in enumerate(knots):
            colx = x[:, j]
            if kn is None:
                pieces.append(colx[:, None])
            else:
                pieces.append(natural_spline_basis(colx, kn))
        return np.hstack(pieces) if pieces else np.empty((len(x), 0))

    def _design(self, x, knots, scaler):
        z = scaler.transform(self._expand(x, knots))
        return np.hstack([np.ones((len(x), 1)), z])

    # -- fitting ---------------------------------------------------------------

    def _prepare(self, x):
        knots = self._make_knots(x)
        basis = self._expand(x, knots)
        scaler = Standardizer(basis)
        return knots, scaler

    def fit(self, x, y, rng=None, fold_labels=None, roles=None):
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        self.full_dim_ = x.shape[1]
        self.keep_ = self._column_mask(x.shape[1], roles)
        xk = x[:, self.keep_]
        self.knots_, self.scaler_ = self._prepare(xk)
        design = self._design(xk, self.knots_, self.scaler_)
        ridge = self.ridge
        if ridge == "cv":
            if fold_labels is None:
                if rng is None:
                    rng = np.random.default_rng(0)
                fold_labels = kfold_indices(len(y), min(10, len(y)), rng)
            ridge = self._cv_ridge(xk, y, fold_labels)[0]
        self.ridge_ = float(ridge)
        self.beta_ = _irls_ridge(design, y, self.ridge_, self.max_iter)
        return self

    def _cv_ridge(self, xk, y, fold_labels):
        """Pooled out-of-fold loss per grid point; returns (best, oof at best)."""
        oof = np.empty((len(y), len(RIDGE_GRID)))
        for f in np.unique(fold_labels):
            tr = fold_labels != f
            knots, scaler = self._prepare(xk[tr])
            design_tr = self._design(xk[tr], knots, scaler)
            design_te = self._design(xk[~tr], knots, scaler)
            for k, ridge in enumerate(RIDGE_GRID):
                beta = _irls_ridge(design_tr, y[tr], ridge, self.max_iter)
                oof[~tr, k] = expit(design_te @ beta)
        losses = [log_loss(y, oof[:, k]) for k in range(len(RIDGE_GRID))]
        best = int(np.argmin(losses))
        return RIDGE_GRID[best], oof[:, best]

    def fit_with_folds(self, x, y, fold_labels, rng, roles=None):
        """Stack hook: out-of-fold predictions, ridge chosen on those folds."""
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        self.full_dim_ = x.shape[1]
        self.keep_ = self._column_mask(x.shape[1], roles)
        xk = x[:, self.keep_]
        if self.ridge == "cv":
            ridge, oof = self._cv_ridge(xk, y, fold_labels)
        else:
            ridge = self.ridge
            oof = np.empty(len(y))
            for f in np.unique(fold_labels):
                tr = fold_labels != f
                knots, scaler = self._prepare(xk[tr])
                beta = _irls_ridge(self._design(xk[tr], knots, scaler), y[tr],
                                   ridge, self.max_iter)
                oof[~tr] = expit(self._design(xk[~tr], knots, scaler) @ beta)
        self.knots_, self.scaler_ = self._prepare(xk)
        design = self._design(xk, self.knots_, self.scaler_)
        self.ridge_ = float(ridge)
        self.beta_ = _irls_ridge(design, y, self.ridge_, self.max_iter)
        return oof, self

    def predict(self, x):
        x = check_matrix(x, self.full_dim_)
        design = self._design(x[:, self.keep_], self.knots_, self.scaler_)
        return expit(design @ self.beta_)
