"""Stratified marginal effects over one selected feature.

Strata partition the cohort on a feature's value; the stratum effect is
the plain mean of the adjusted per-subject effects over its members, so
stratum effects weighted by size always reassemble the overall effect.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cohort import Cohort
from .exceptions import (DegenerateDenominator, EmptyStratum, InvalidBreaks)
from .tmle import TargetedFit, simultaneous_band


@dataclass(frozen=True)
class Stratum:
    feature: int
    label: str
    q: int
    members: np.ndarray
    lo: float
    hi: float

    @property
    def size(self) -> int:
        return len(self.members)


def stratify(cohort: Cohort, feature: int, q: int | None = None,
             breaks=None, mode: str = "equal") -> list[Stratum]:
    """Partition the cohort on one feature.

    Binary features split by level. Continuous features split either at
    explicit ``breaks``, at equal-width cuts over [0, 1] (the simulated
    support), or at quantile cuts (a better default for skewed ingested
    data). Empty strata are dropped with a warning; bins are
    right-open except the last.
    """
    if not 0 <= feature < cohort.dim:
        raise InvalidBreaks(f"feature index {feature} out of range")
    col = cohort.x[:, feature]
    values = np.unique(col)
    name = cohort.feature_names[feature]
    if len(values) <= 2 and breaks is None:
        out = []
        for k, v in enumerate(values):
            members = np.nonzero(col == v)[0]
            out.append(Stratum(feature=feature, label=f"{name}={v:g}", q=k + 1,
                               members=members, lo=float(v), hi=float(v)))
        return out
    if breaks is not None:
        edges = np.asarray(breaks, dtype=np.float64)
        if len(edges) < 2 or np.any(np.diff(edges) <= 0):
            raise InvalidBreaks("breaks must be strictly increasing, length >= 2")
    else:
        if q is None or q < 1:
            raise InvalidBreaks("need q >= 1 or explicit breaks")
        if mode == "equal":
            edges = np.linspace(0.0, 1.0, q + 1)
        elif mode == "quantile":
            edges = np.unique(np.quantile(col, np.linspace(0, 1, q + 1)))
            if len(edges) < 2:
                raise InvalidBreaks("feature too degenerate for quantile breaks")
        else:
            raise InvalidBreaks(f"unknown stratification mode '{mode}'")
    idx = np.clip(np.searchsorted(edges, col, side="right") - 1, 0, len(edges) - 2)
    out = []
    for k in range(len(edges) - 1):
        members = np.nonzero(idx == k)[0]
        if len(members) == 0:
            warnings.warn(f"dropping empty stratum {k + 1} of {name}")
            continue
        out.append(Stratum(feature=feature,
                           label=f"{name} in [{edges[k]:g},{edges[k + 1]:g})",
                           q=k + 1, members=members,
                           lo=float(edges[k]), hi=float(edges[k + 1])))
    return out


def mcate(fit: TargetedFit, stratum: Stratum, t: int) -> float:
    """Mean adjusted effect over the stratum members at time t."""
    if stratum.size == 0:
        raise EmptyStratum(stratum.label)
    return float(fit.psi_star[stratum.members, t - 1].mean())


def mcate_curve(fit: TargetedFit, stratum: Stratum) -> np.ndarray:
    if stratum.size == 0:
        raise EmptyStratum(stratum.label)
    return fit.psi_star[stratum.members].mean(axis=0)


def stratum_band(fit: TargetedFit, stratum: Stratum, level: float = 0.95,
                 seed: int = 0) -> dict:
    """Simultaneous band for the stratum curve from member influence rows."""
    return simultaneous_band(fit.eic_ate()[stratum.members], level=level,
                             seed=seed)


def pct_bias(psi_hat_q: float, psi_true_q: float) -> float:
    """|estimate - truth| / |estimate|; the estimate is the denominator."""
    if abs(psi_hat_q) <= 1e-12:
        raise DegenerateDenominator("estimated stratum effect is zero")
    return abs((psi_hat_q - psi_true_q) / psi_hat_q)
