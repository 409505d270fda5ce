"""Selection-bias adjustment of the initial survival-difference estimates.

Propensity and censoring-hazard nuisance models turn the initial
arm-specific hazards into an efficient-influence-curve equation; a
single universal least-favorable fluctuation of the logit hazards walks
toward that equation's root in small steps and stops once the empirical
curve-wide score is within sampling noise. Nuisance fits never move
during targeting; only the outcome hazards do.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cohort import Cohort, expand_counting_process
from .effects import (EffectSurface, hazard_features, hazard_roles,
                      survival_from_hazard)
from .exceptions import (DegenerateCovariance, DimensionError, EmptyArmError,
                         NonFiniteUpdate)
from .learners import fit_super_learner

NUISANCE_CLAMP = (0.01, 0.99)
DEFAULT_STEP = 1e-3
DEFAULT_MAX_STEPS = 5000
# enough draws that the sup-quantile's Monte Carlo error (~0.006) sits well
# inside the tolerances the band is checked against
BAND_DRAWS = 100_000


@dataclass(frozen=True)
class NuisanceFits:
    """Clamped propensity and censoring-survivor predictions.

    ``g`` is P(A=1|X) per subject; ``gc`` holds the censoring survivor
    through each period for both arms, with ``gc[a][i, s-1]`` the
    probability of remaining uncensored through period s. All hazards
    behind these are clamped into the positivity window before the chain
    rule, and the share of propensity predictions hitting the clamp is
    recorded as a positivity warning signal.
    """

    g: np.ndarray
    gc: dict
    horizon: int
    positivity_warning: bool
    clamped_share: float


def _censoring_table(cohort: Cohort):
    """Counting-process rows for the censoring process.

    At-risk rows mirror the outcome expansion; the outcome is 1 on the
    last row of subjects censored before the horizon.
    """
    table = expand_counting_process(cohort)
    censored = (cohort.y == 0) & (cohort.t_obs <= cohort.horizon)
    last_row = np.zeros(cohort.n, dtype=np.int64)
    np.maximum.at(last_row, table.subject_index, np.arange(table.n_rows))
    event = np.zeros(table.n_rows, dtype=np.int8)
    event[last_row[censored]] = 1
    return table, event


def fit_nuisances(cohort: Cohort, learner_specs, seed: int) -> NuisanceFits:
    """Fit the treatment and censoring models and tabulate their predictions."""
    for arm in (0, 1):
        if not (cohort.a == arm).any():
            raise EmptyArmError(f"no subjects with a={arm}")
    lo, hi = NUISANCE_CLAMP
    g_model = fit_super_learner(learner_specs, cohort.x,
                                cohort.a.astype(np.float64), folds=10,
                                seed=seed + 11)
    g_raw = g_model.predict(cohort.x)
    clamped = float(((g_raw < lo) | (g_raw > hi)).mean())
    g = np.clip(g_raw, lo, hi)

    table, cens_event = _censoring_table(cohort)
    x_rows = cohort.x[table.subject_index]
    a_rows = cohort.a[table.subject_index].astype(np.float64)
    feats = hazard_features(x_rows, table.t, cohort.horizon, extra=a_rows[:, None])
    hc_model = fit_super_learner(learner_specs, feats,
                                 cens_event.astype(np.float64), folds=10,
                                 seed=seed + 13,
                                 roles=hazard_roles(cohort.dim, cohort.horizon, 1))
    gc = {}
    theta = cohort.horizon
    tgrid = np.tile(np.arange(1, theta + 1), cohort.n)
    x_rep = np.repeat(cohort.x, theta, axis=0)
    for arm in (0, 1):
        arm_col = np.full((len(tgrid), 1), float(arm))
        hc = hc_model.predict(hazard_features(x_rep, tgrid, theta, extra=arm_col))
        hc = np.clip(hc.reshape(cohort.n, theta), lo, hi)
        gc[arm] = survival_from_hazard(hc)
    return NuisanceFits(g=g, gc=gc, horizon=theta,
                        positivity_warning=clamped > 0.05,
                        clamped_share=clamped)


def _weight_matrix(cohort: Cohort, fits: NuisanceFits, arm: int) -> np.ndarray:
    """(n, horizon) inverse-probability weights 1/(g_a * Gc(s-1)) per period."""
    g_arm = fits.g if arm == 1 else 1.0 - fits.g
    gc = fits.gc[arm]
    gc_prev = np.concatenate([np.ones((cohort.n, 1)), gc[:, :-1]], axis=1)
    return 1.0 / (g_arm[:, None] * gc_prev)


def clever_covariate(cohort: Cohort, fits: NuisanceFits, surv: np.ndarray,
                     arm: int) -> np.ndarray:
    """(n, s, t) clever-covariate tensor for the observed-data score.

    Entry (i, s-1, t-1) is -1[A_i = arm] * S(t)/S(s) / (g_a(x_i) *
    Gc(s-1|x_i)) for s <= t and 0 elsewhere.
    """
    direction = _update_direction_tensor(cohort, fits, surv, arm)
    ind = (cohort.a == arm).astype(np.float64)
    return direction * ind[:, None, None]


def _update_direction_tensor(cohort: Cohort, fits: NuisanceFits,
                             surv: np.ndarray, arm: int) -> np.ndarray:
    """Clever covariate as a function of covariates only (no arm indicator).

    The fluctuation moves the hazard function h(s | arm, x) for every
    subject's covariates; the treatment indicator belongs to the
    observed-data residual, not to the direction.
    """
    theta = fits.horizon
    weights = _weight_matrix(cohort, fits, arm)  # (n, s)
    ratio = surv[:, None, :] / surv[:, :, None]  # (n, s, t) = S(t)/S(s)
    upper = np.triu(np.ones((theta, theta)))  # s <= t mask
    return -weights[:, :, None] * ratio * upper[None, :, :]


def _residual_matrix(cohort: Cohort, hazards: np.ndarray, arm: int) -> np.ndarray:
    """(n, s) at-risk martingale residuals dN(s) - h(s) for observed rows."""
    theta = hazards.shape[1]
    t_end = np.minimum(cohort.t_obs, theta)
    sgrid = np.arange(1, theta + 1)
    at_risk = sgrid[None, :] <= t_end[:, None]
    dn = np.zeros_like(hazards)
    observed = (cohort.y == 1) & (cohort.t_obs <= theta)
    dn[observed, cohort.t_obs[observed] - 1] = 1.0
    resid = (dn - hazards) * at_risk
    resid *= (cohort.a == arm)[:, None]
    return resid


def eic_matrix(cohort: Cohort, fits: NuisanceFits, hazards: np.ndarray,
               surv: np.ndarray, arm: int, members=None) -> np.ndarray:
    """(n, t) efficient-influence-curve values for the arm survival curve.

    ``members`` restricts the centering of the substitution part to a
    stratum, which is what subgroup targeting solves; the default
    centers on the whole cohort.
    """
    if surv.shape != (cohort.n, fits.horizon):
        raise DimensionError("survival matrix shape does not match cohort/horizon")
    h_tensor = _update_direction_tensor(cohort, fits, surv, arm)
    resid = _residual_matrix(cohort, hazards, arm)
    martingale = np.einsum("ist,is->it", h_tensor, resid)
    center = surv.mean(axis=0) if members is None else surv[members].mean(axis=0)
    return martingale + surv - center[None, :]


@dataclass
class TargetedFit:
    """Post-targeting hazards, curves, influence values and diagnostics."""

    hazards: dict
    survival: dict
    eic: dict
    steps: int
    converged: bool
    max_steps_exceeded: bool
    final_score: dict
    tolerance: dict
    subset: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def psi_star(self) -> np.ndarray:
        """Targeted per-subject effect surface (n, horizon)."""
        return self.survival[1] - self.survival[0]

    def ate(self, t: int) -> float:
        members = self.psi_star if self.subset is None else self.psi_star[self.subset]
        return float(members[:, t - 1].mean())

    def eic_ate(self) -> np.ndarray:
        """Influence values of the effect (treated minus control curves)."""
        return self.eic[1] - self.eic[0]


def _score_and_tol(eic: np.ndarray, members: np.ndarray):
    cols = eic[members]
    n = len(cols)
    mean = cols.mean(axis=0)
    sd = cols.std(axis=0, ddof=1) if n > 1 else np.zeros(eic.shape[1])
    tol = sd / (np.sqrt(n) * np.log(max(n, 3))) + 1e-12
    return mean, tol


def one_step_target(cohort: Cohort, fits: NuisanceFits,
                    initial: EffectSurface, step_size: float = DEFAULT_STEP,
                    max_steps: int = DEFAULT_MAX_STEPS,
                    subset=None) -> TargetedFit:
    """Walk the logit hazards along the universal least-favorable direction.

    Both arms are targeted against the same stopping rule: every
    per-time empirical score must fall below its own standard deviation
    divided by sqrt(n)*log(n). ``subset`` restricts the empirical means
    (and the returned estimate) to a stratum while still fluctuating the
    hazard function for every subject, which is how subgroup effects are
    adjusted. Hazard-monotonicity of the survival output is asserted on
    every exit path.
    """
    if step_size <= 0:
        raise ValueError("step_size must be positive")
    members = np.arange(cohort.n) if subset is None else np.asarray(subset)
    if members.size == 0:
        raise ValueError("subset must contain at least one subject")
    mem = None if subset is None else members
    hazards = {arm: _hazard_from_survival(s) for arm, s in
               ((1, initial.s1), (0, initial.s0))}
    surv = {arm: survival_from_hazard(h) for arm, h in hazards.items()}
    logits = {arm: np.log(h / (1.0 - h)) for arm, h in hazards.items()}

    steps = 0
    converged = {0: False, 1: False}
    score = {}
    tol = {}
    for _ in range(max_steps):
        moved = False
        for arm in (0, 1):
            eic = eic_matrix(cohort, fits, hazards[arm], surv[arm], arm, mem)
            score[arm], tol[arm] = _score_and_tol(eic, members)
            converged[arm] = bool(np.all(np.abs(score[arm]) <= tol[arm]))
            if converged[arm]:
                continue
            norm = float(np.linalg.norm(score[arm]))
            direction = _update_direction_tensor(cohort, fits, surv[arm], arm)
            dlogit = np.einsum("ist,t->is", direction, score[arm] / norm)
            logits[arm] = logits[arm] + step_size * dlogit
            if not np.isfinite(logits[arm]).all():
                raise NonFiniteUpdate(steps)
            hazards[arm] = 1.0 / (1.0 + np.exp(-logits[arm]))
            surv[arm] = survival_from_hazard(hazards[arm])
            moved = True
        if not moved:
            break
        steps += 1
    eic = {}
    for arm in (0, 1):
        eic[arm] = eic_matrix(cohort, fits, hazards[arm], surv[arm], arm, mem)
        score[arm], tol[arm] = _score_and_tol(eic[arm], members)
        converged[arm] = bool(np.all(np.abs(score[arm]) <= tol[arm]))
    all_converged = converged[0] and converged[1]
    for arm in (0, 1):
        ds = np.diff(surv[arm], axis=1)
        assert (ds <= 1e-12).all(), "targeted survival must be non-increasing"
        assert (surv[arm] > 0).all(), "targeted survival must stay positive"
    return TargetedFit(
        hazards=hazards, survival=surv, eic=eic, steps=steps,
        converged=all_converged, max_steps_exceeded=not all_converged,
        final_score={a: score[a].copy() for a in (0, 1)},
        tolerance={a: tol[a].copy() for a in (0, 1)},
        subset=None if subset is None else members,
        diagnostics={"max_abs_score": {a: float(np.abs(score[a]).max())
                                       for a in (0, 1)}},
    )


def _hazard_from_survival(surv: np.ndarray) -> np.ndarray:
    """Invert the chain rule: h(s) = 1 - S(s)/S(s-1), clamped into (0,1)."""
    prev = np.concatenate([np.ones((len(surv), 1)), surv[:, :-1]], axis=1)
    h = 1.0 - surv / prev
    return np.clip(h, 1e-6, 1.0 - 1e-6)


def simultaneous_band(eic: np.ndarray, level: float = 0.95,
                      seed: int = 0) -> dict:
    """Simultaneous confidence half-widths across the whole curve.

    The multiplier is the ``level`` quantile of the sup of |Z| over a
    centered Gaussian vector with the influence columns' correlation,
    estimated from 10,000 Monte Carlo draws. Zero-variance columns get
    zero-width bands and are excluded from the sup.
    """
    if not 0 < level < 1:
        raise ValueError("level must be in (0,1)")
    eic = np.asarray(eic, dtype=np.float64)
    n, theta = eic.shape
    sd = eic.std(axis=0, ddof=1) if n > 1 else np.zeros(theta)
    sigma = sd / np.sqrt(n)
    live = sd > 0
    if not live.any():
        raise DegenerateCovariance("every influence column has zero variance")
    corr = np.corrcoef(eic[:, live], rowvar=False)
    corr = np.atleast_2d(corr)
    # small jitter keeps the factorization stable for near-singular columns
    chol = np.linalg.cholesky(corr + 1e-10 * np.eye(corr.shape[0]))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    draws = rng.standard_normal((BAND_DRAWS, corr.shape[0])) @ chol.T
    sup = np.abs(draws).max(axis=1)
    q = float(np.quantile(sup, level))
    half = np.zeros(theta)
    half[live] = q * sigma[live]
    return {"half_width": half, "multiplier": q, "sigma": sigma, "level": level}
