"""Shared learner plumbing: specs, folds, link helpers, standardization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DimensionError

PROB_EPS = 1e-6
LEARNER_KINDS = (
    "elastic_net_logistic",
    "adaptive_lasso_logistic",
    "spline_logistic",
    "hinge_logistic",
    "tree_ensemble",
)


@dataclass(frozen=True)
class BaseLearnerSpec:
    """A named learner family plus its hyperparameters."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind '{self.kind}'")

    def build(self):
        from . import hinge, linear, spline, trees

        factory = {
            "elastic_net_logistic": linear.ElasticNetLogistic,
            "adaptive_lasso_logistic": linear.AdaptiveLassoLogistic,
            "spline_logistic": spline.SplineLogistic,
            "hinge_logistic": hinge.HingeLogistic,
            "tree_ensemble": trees.BaggedTreesLogistic,
        }[self.kind]
        return factory(**self.params)


def default_specs() -> list[BaseLearnerSpec]:
    """Stack used when a config does not name learners.

    Three families: penalized linear, smooth additive, piecewise-linear
    adaptive. Together they cover the main shapes a conditional hazard
    takes in moderate dimension. The spline member relies on the smooth
    time term rather than the saturated per-period indicators, which
    keeps its variance competitive on sparse-event expansions.
    """
    return [
        # ridge-leaning mixing: hazard surfaces want smooth shrinkage more
        # than sparsity, and heavy L1 attenuates subgroup contrasts
        BaseLearnerSpec("elastic_net_logistic", {"alpha": 0.1}),
        BaseLearnerSpec("spline_logistic", {"time_indicators": "drop",
                                            "ridge": "cv"}),
        BaseLearnerSpec("hinge_logistic"),
    ]


def expit(eta):
    eta = np.clip(eta, -35.0, 35.0)
    return 1.0 / (1.0 + np.exp(-eta))


def clamp_probability(p):
    """Clamp probabilities into [PROB_EPS, 1 - PROB_EPS]."""
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def log_loss(y, p) -> float:
    p = clamp_probability(np.asarray(p, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


def kfold_indices(n: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Deterministic fold labels in 0..folds-1 given the generator state."""
    if folds < 2 or folds > n:
        raise ValueError("need 2 <= folds <= n")
    labels = np.tile(np.arange(folds), n // folds + 1)[:n]
    return labels[rng.permutation(n)]


def check_matrix(x, expected_dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-d, got shape {x.shape}")
    if expected_dim is not None and x.shape[1] != expected_dim:
        raise DimensionError(
            f"feature row has {x.shape[1]} columns, model expects {expected_dim}")
    return np.ascontiguousarray(x)


class Standardizer:
    """Column-wise centering and scaling with constant columns left alone."""

    def __init__(self, x: np.ndarray):
        self.mean = x.mean(axis=0)
        sd = x.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)
        self.constant = sd == 0

    def transform(self, x: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray((x - self.mean) / self.sd)
