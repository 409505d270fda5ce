"""Initial effect estimation: arm-specific hazards to survival differences.

Treated and control hazards are fit as stacked binary-outcome models on
the person-period expansion of each arm; potential survival curves come
from the probability chain rule over the discrete grid, and the initial
effect surface is their difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cohort import Cohort, PersonPeriodTable, expand_counting_process
from .exceptions import (DegenerateNormalizer, DimensionError, EmptyArmError,
                         NoEventsError)
from .learners import fit_super_learner
from .learners.stack import StackedModel

HAZARD_EPS = 1e-6


def hazard_features(x: np.ndarray, t: np.ndarray, horizon: int,
                    extra: np.ndarray | None = None) -> np.ndarray:
    """Design matrix for hazard models over person-period rows.

    The period index enters both as a scaled linear term and as one
    indicator per period, so learners can pick smooth or saturated
    baseline shapes (see ``hazard_roles``). ``extra`` columns (e.g. the
    treatment flag for the censoring model) are prepended.
    """
    onehot = np.zeros((len(t), horizon))
    onehot[np.arange(len(t)), t - 1] = 1.0
    cols = [x, t[:, None] / horizon, onehot]
    if extra is not None:
        cols.insert(0, extra if extra.ndim == 2 else extra[:, None])
    return np.ascontiguousarray(np.hstack(cols))


def hazard_roles(dim: int, horizon: int, n_extra: int = 0) -> tuple:
    """Column roles matching ``hazard_features`` output order."""
    return tuple(["covariate"] * (n_extra + dim) + ["time_linear"]
                 + ["time_indicator"] * horizon)


def fit_hazard_stack(cohort: Cohort, table: PersonPeriodTable, specs,
                     seed: int, extra_col: np.ndarray | None = None) -> StackedModel:
    """Stacked hazard model on an already-expanded person-period table."""
    x_rows = cohort.x[table.subject_index]
    extra = None if extra_col is None else extra_col[table.subject_index]
    feats = hazard_features(x_rows, table.t, table.horizon, extra)
    roles = hazard_roles(cohort.dim, table.horizon,
                         0 if extra_col is None else 1)
    return fit_super_learner(specs, feats, table.event.astype(np.float64),
                             folds=10, seed=seed, roles=roles)


@dataclass(frozen=True)
class OutcomeModels:
    """Arm-specific hazard stacks sharing a horizon and feature schema."""

    model_treated: StackedModel
    model_control: StackedModel
    horizon: int
    dim: int

    def model(self, arm: int) -> StackedModel:
        return self.model_treated if arm == 1 else self.model_control


@dataclass(frozen=True)
class EffectSurface:
    """Per-subject potential survival curves and their difference.

    ``s1``, ``s0`` and ``psi_hat`` are (n, horizon) with column t-1
    holding time t.
    """

    s1: np.ndarray
    s0: np.ndarray

    @property
    def psi_hat(self) -> np.ndarray:
        return self.s1 - self.s0

    def ate(self, t: int) -> float:
        return float(self.psi_hat[:, t - 1].mean())


def fit_outcome_models(cohort: Cohort, specs, seed: int) -> OutcomeModels:
    """Fit treated and control hazard stacks on disjoint arm expansions."""
    models = {}
    for arm in (1, 0):
        mask = cohort.a == arm
        if not mask.any():
            raise EmptyArmError(f"no subjects with a={arm}")
        sub = cohort.subset(np.nonzero(mask)[0])
        table = expand_counting_process(sub)
        if table.event.sum() == 0:
            raise NoEventsError(f"arm a={arm} has no events before the horizon")
        models[arm] = fit_hazard_stack(sub, table, specs, seed=seed + arm)
    return OutcomeModels(model_treated=models[1], model_control=models[0],
                         horizon=cohort.horizon, dim=cohort.dim)


def hazard_matrix(model: StackedModel, x: np.ndarray, horizon: int) -> np.ndarray:
    """(n, horizon) clamped hazard predictions for every subject and period."""
    n = len(x)
    t = np.tile(np.arange(1, horizon + 1), n)
    x_rep = np.repeat(x, horizon, axis=0)
    h = model.predict(hazard_features(x_rep, t, horizon))
    return np.clip(h.reshape(n, horizon), HAZARD_EPS, 1.0 - HAZARD_EPS)


def survival_from_hazard(h: np.ndarray) -> np.ndarray:
    """Chain rule S(t) = prod_{s<=t} (1 - h(s)) along the last axis."""
    return np.cumprod(1.0 - h, axis=-1)


def survival_curve(model: StackedModel, x, horizon: int) -> np.ndarray:
    """Survival curve S(1..horizon) for one covariate row."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    return survival_from_hazard(hazard_matrix(model, x, horizon))[0]


def estimate_ite(models: OutcomeModels, cohort: Cohort) -> EffectSurface:
    """Initial effect surface: treated minus control potential survival."""
    if cohort.dim != models.dim:
        raise DimensionError(
            f"cohort has {cohort.dim} covariates, models expect {models.dim}")
    s1 = survival_from_hazard(hazard_matrix(models.model_treated, cohort.x,
                                            models.horizon))
    s0 = survival_from_hazard(hazard_matrix(models.model_control, cohort.x,
                                            models.horizon))
    return EffectSurface(s1=s1, s0=s0)


def nrmse(psi_hat_t: np.ndarray, psi_true_t: np.ndarray) -> float:
    """Root-mean-square error scaled by |mean estimated effect| at one time.

    The root uses the mean (not the sum) of squared errors so values are
    comparable across sample sizes; the normalizer takes the absolute
    value because effects here are signed.
    """
    psi_hat_t = np.asarray(psi_hat_t, dtype=np.float64)
    psi_true_t = np.asarray(psi_true_t, dtype=np.float64)
    if psi_hat_t.shape != psi_true_t.shape:
        raise DimensionError("effect vectors must have equal length")
    center = abs(float(psi_hat_t.mean()))
    if center < 1e-12:
        raise DegenerateNormalizer("mean estimated effect is numerically zero")
    return float(np.sqrt(((psi_hat_t - psi_true_t) ** 2).mean()) / center)


def nrmse_curve(surface: EffectSurface, psi_true: np.ndarray) -> np.ndarray:
    """NRMSE at every time point; columns align with the surface."""
    return np.array([nrmse(surface.psi_hat[:, k], psi_true[:, k])
                     for k in range(surface.psi_hat.shape[1])])
