"""Base learners and the cross-validated stacking ensemble."""

from .bart import SumOfTreesSampler
from .base import (BaseLearnerSpec, clamp_probability, default_specs, expit,
                   kfold_indices, log_loss)
from .hinge import HingeLogistic
from .linear import (AdaptiveLassoLogistic, AdaptiveLassoRegression,
                     ElasticNetLogistic, ElasticNetRegression)
from .spline import SplineLogistic
from .stack import StackedModel, fit_super_learner, predict_probability
from .trees import BaggedTreesLogistic, RegressionForest, RegressionTree

__all__ = [
    "BaseLearnerSpec", "default_specs", "expit", "clamp_probability",
    "kfold_indices", "log_loss",
    "ElasticNetLogistic", "AdaptiveLassoLogistic",
    "ElasticNetRegression", "AdaptiveLassoRegression",
    "SplineLogistic", "HingeLogistic",
    "BaggedTreesLogistic", "RegressionForest", "RegressionTree",
    "SumOfTreesSampler",
    "StackedModel", "fit_super_learner", "predict_probability",
]
