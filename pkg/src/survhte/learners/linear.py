"""Penalized generalized linear learners fit by coordinate descent.

Both the logistic learners used inside hazard/nuisance stacks and the
gaussian regressions used by the importance scorers share one path
engine: an IRLS outer loop (skipped for gaussian) around the compiled
coordinate-descent kernel, warm-started down a log-spaced grid of
penalty strengths.
"""

from __future__ import annotations

import numpy as np

from .._kernels import enet_cd
from ..exceptions import SingularFitError
from .base import Standardizer, check_matrix, expit, kfold_indices, log_loss

N_LAMBDA = 50
LAMBDA_MIN_RATIO = 1e-4
CD_TOL = 1e-6
CD_MAX_SWEEPS = 500
IRLS_MAX = 8
IRLS_TOL = 1e-5
MIN_IRLS_WEIGHT = 1e-5


def lambda_grid(x_std, y, alpha, n_lambda=N_LAMBDA, min_ratio=LAMBDA_MIN_RATIO):
    """Log-spaced grid from the smallest penalty zeroing every coefficient."""
    n = x_std.shape[0]
    resid = y - y.mean()
    lam_max = np.abs(x_std.T @ resid).max() / (n * max(alpha, 1e-3))
    lam_max = max(lam_max, 1e-10)
    return np.geomspace(lam_max, lam_max * min_ratio, n_lambda)


def _solve_at_lambda(x_f, x_sq, y, alpha, lam, coef, intercept, family):
    """Warm-started solve at one penalty; mutates coef/intercept in place.

    ``x_f`` must be Fortran-ordered and ``x_sq`` its elementwise square
    (precomputed once per path).
    """
    n = x_f.shape[0]
    l1 = n * lam * alpha
    l2 = n * lam * (1.0 - alpha)
    if family == "gaussian":
        w = np.ones(n)
        resid = y - intercept[0] - x_f @ coef
        col_ss = x_sq.sum(axis=0)
        enet_cd(x_f, w, resid, coef, intercept, col_ss, l1, l2,
                CD_MAX_SWEEPS, CD_TOL)
        return
    for _ in range(IRLS_MAX):
        eta = intercept[0] + x_f @ coef
        p = expit(eta)
        w = np.maximum(p * (1.0 - p), MIN_IRLS_WEIGHT)
        resid = (y - p) / w
        col_ss = w @ x_sq
        before = coef.copy()
        b0_before = intercept[0]
        enet_cd(x_f, w, resid, coef, intercept, col_ss, l1, l2,
                CD_MAX_SWEEPS, CD_TOL)
        if not np.isfinite(coef).all() or not np.isfinite(intercept[0]):
            raise SingularFitError("coordinate descent diverged")
        move = max(np.abs(coef - before).max(initial=0.0),
                   abs(intercept[0] - b0_before))
        if move < IRLS_TOL:
            break


def fit_path(x_std, y, alpha, lambdas, family, penalty_weights=None):
    """Coefficients along a decreasing penalty path, warm-started.

    ``penalty_weights`` implements per-coefficient L1 reweighting (the
    adaptive step) by rescaling columns before descent and undoing the
    scaling on the returned coefficients.
    """
    p = x_std.shape[1]
    xw = x_std if penalty_weights is None else x_std / penalty_weights
    x_f = np.asfortranarray(xw)
    x_sq = x_f * x_f
    coef = np.zeros(p)
    intercept = np.zeros(1)
    out_coef = np.empty((len(lambdas), p))
    out_b0 = np.empty(len(lambdas))
    for k, lam in enumerate(lambdas):
        _solve_at_lambda(x_f, x_sq, y, alpha, lam, coef, intercept, family)
        beta = coef if penalty_weights is None else coef / penalty_weights
        out_coef[k] = beta
        out_b0[k] = intercept[0]
    return out_b0, out_coef


class _PenalizedGLM:
    """Shared machinery for the elastic-net and adaptive-lasso learners."""

    family = "binomial"

    def __init__(self, alpha=0.5, n_lambda=N_LAMBDA,
                 lambda_min_ratio=LAMBDA_MIN_RATIO, lambdas=None, cv_folds=10):
        if not 0 < alpha <= 1:
            raise ValueError("alpha in (0, 1] required")
        self.alpha = alpha
        self.n_lambda = n_lambda
        self.lambda_min_ratio = lambda_min_ratio
        self.lambdas = None if lambdas is None else np.asarray(lambdas, float)
        self.cv_folds = cv_folds

    def _penalty_weights(self, x_std, y):
        return None

    def _grid(self, x_std, y):
        if self.lambdas is not None:
            return np.sort(self.lambdas)[::-1]
        return lambda_grid(x_std, y, self.alpha, self.n_lambda,
                           self.lambda_min_ratio)

    def fit(self, x, y, rng, fold_labels=None, roles=None):
        """Fit with penalty strength chosen by cross-validated log loss.

        ``fold_labels`` lets a caller impose its own partition (the
        stacking ensemble passes the one it uses for weight estimation);
        otherwise folds come from ``rng``.
        """
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        self.scaler = Standardizer(x)
        x_std = self.scaler.transform(x)
        grid = self._grid(x_std, y)
        pw = self._penalty_weights(x_std, y)
        if len(grid) == 1:
            best = 0
        else:
            if fold_labels is None:
                fold_labels = kfold_indices(len(y), min(self.cv_folds, len(y)), rng)
            losses = np.zeros(len(grid))
            for f in np.unique(fold_labels):
                tr = fold_labels != f
                b0s, coefs = fit_path(x_std[tr], y[tr], self.alpha, grid,
                                      self.family, pw)
                eta = b0s[None, :] + x_std[~tr] @ coefs.T
                pred = expit(eta) if self.family == "binomial" else eta
                for k in range(len(grid)):
                    losses[k] += self._heldout_loss(y[~tr], pred[:, k]) * (~tr).sum()
            best = int(np.argmin(losses))
        b0s, coefs = fit_path(x_std, y, self.alpha, grid[:best + 1],
                              self.family, pw)
        self.lambda_ = float(grid[best])
        self.intercept_ = float(b0s[-1])
        self.coef_std_ = coefs[-1]
        self.oof_path_ = None
        return self

    def _heldout_loss(self, y, pred):
        if self.family == "binomial":
            return log_loss(y, pred)
        return float(((y - pred) ** 2).mean())

    def fit_with_folds(self, x, y, fold_labels, rng, roles=None):
        """Stack hook: out-of-fold predictions at the CV-selected penalty.

        Fits the whole path once per provided fold, pools the held-out
        loss to pick the penalty, refits on all rows, and returns the
        out-of-fold predictions at the winning penalty so the stack can
        estimate its weights without refitting anything.
        """
        x = check_matrix(x)
        y = np.asarray(y, dtype=np.float64)
        scaler = Standardizer(x)
        x_std = scaler.transform(x)
        grid = self._grid(x_std, y)
        pw = self._penalty_weights(x_std, y)
        n = len(y)
        oof = np.empty((n, len(grid)))
        for f in np.unique(fold_labels):
            tr = fold_labels != f
            b0s, coefs = fit_path(x_std[tr], y[tr], self.alpha, grid,
                                  self.family, pw)
            eta = b0s[None, :] + x_std[~tr] @ coefs.T
            oof[~tr] = expit(eta) if self.family == "binomial" else eta
        losses = [self._heldout_loss(y, oof[:, k]) for k in range(len(grid))]
        best = int(np.argmin(losses))
        # refit on the full sample at the selected penalty
        self.scaler = scaler
        b0s, coefs = fit_path(x_std, y, self.alpha, grid[:best + 1],
                              self.family, pw)
        self.lambda_ = float(grid[best])
        self.intercept_ = float(b0s[-1])
        self.coef_std_ = coefs[-1]
        return oof[:, best], self

    def predict(self, x):
        x = check_matrix(x, len(self.coef_std_))
        eta = self.intercept_ + self.scaler.transform(x) @ self.coef_std_
        return expit(eta) if self.family == "binomial" else eta

    @property
    def standardized_coef(self) -> np.ndarray:
        """Coefficients on the standardized scale (importance scores use these)."""
        return self.coef_std_


class ElasticNetLogistic(_PenalizedGLM):
    """Elastic-net penalized logistic regression."""

    family = "binomial"


class AdaptiveLassoLogistic(_PenalizedGLM):
    """Lasso with penalties reweighted by an initial ridge fit.

    Each coefficient's L1 penalty is scaled by 1/|ridge coefficient|;
    coefficients the ridge fit zeroes get a capped (large) weight rather
    than an infinite one.
    """

    family = "binomial"

    def __init__(self, ridge_lambda=1e-2, **kwargs):
        kwargs.setdefault("alpha", 1.0)
        super().__init__(**kwargs)
        self.ridge_lambda = ridge_lambda

    def _penalty_weights(self, x_std, y):
        coef = np.zeros(x_std.shape[1])
        intercept = np.zeros(1)
        x_f = np.asfortranarray(x_std)
        _solve_at_lambda(x_f, x_f * x_f, y, 0.01, self.ridge_lambda, coef,
                         intercept, self.family)
        mag = np.abs(coef)
        floor = max(mag.max() * 1e-3, 1e-8)
        return 1.0 / np.maximum(mag, floor)


class ElasticNetRegression(_PenalizedGLM):
    """Gaussian elastic net (importance scoring of continuous effects)."""

    family = "gaussian"


class AdaptiveLassoRegression(AdaptiveLassoLogistic):
    """Gaussian adaptive lasso (importance scoring of continuous effects)."""

    family = "gaussian"
