import numpy as np
import pytest

from survhte import Cohort


def make_cohort(n=40, dim=2, horizon=6, seed=0, treated_share=0.5,
                event_share=0.6):
    """Small deterministic cohort for unit tests (not the simulation DGP)."""
    rng = np.random.default_rng(seed)
    x = rng.random((n, dim))
    a = (rng.random(n) < treated_share).astype(np.int8)
    t_obs = rng.integers(1, horizon + 3, size=n).astype(np.int64)
    y = (rng.random(n) < event_share).astype(np.int8)
    return Cohort(ids=tuple(f"u{i}" for i in range(n)), x=x, a=a, t_obs=t_obs,
                  y=y, horizon=horizon,
                  feature_names=tuple(f"x{j + 1}" for j in range(dim)))


def life_table(t_obs, y, horizon):
    """Discrete Kaplan-Meier oracle computed directly from the data.

    Subjects observed beyond the horizon stay at risk through it without
    an event; events count only at their own period.
    """
    t_obs = np.asarray(t_obs)
    y = np.asarray(y)
    capped = np.minimum(t_obs, horizon)
    observed = (y == 1) & (t_obs <= horizon)
    surv = []
    s = 1.0
    for t in range(1, horizon + 1):
        at_risk = (capped >= t).sum()
        events = (observed & (t_obs == t)).sum()
        if at_risk > 0:
            s *= 1.0 - events / at_risk
        surv.append(s)
    return np.array(surv)


@pytest.fixture
def tiny_cohort():
    return make_cohort()
