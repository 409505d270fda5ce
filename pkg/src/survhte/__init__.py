"""Heterogeneous treatment effects on right-censored time-to-event data.

Estimates treatment effects as differences in survival probabilities in
three steps: stacked discrete-hazard models give per-subject potential
survival curves; an ensemble of importance scorers with knee-point
thresholds finds the covariates driving effect heterogeneity; and a
one-step targeted update of the hazards removes first-order selection
bias from treatment assignment and censoring before subgroup effects
are reported.
"""

__version__ = "0.1.0"

from ._kernels import backend_name
from .cohort import (Cohort, PersonPeriodTable, Subject,
                     expand_counting_process, read_cohort_csv,
                     validate_cohort, write_cohort_csv)
from .dgp import (DgpParams, TruthHandle, calibrate_rate, generate_cohort,
                  tau, true_ite, true_propensity, true_survival)
from .effects import (EffectSurface, OutcomeModels, estimate_ite,
                      fit_outcome_models, nrmse, nrmse_curve, survival_curve)
from .importance import (ImportanceCurve, SelectionResult, bootstrap_stability,
                         ppv_tpr, score_features, select_features)
from .kneedle import knee_point
from .cate import Stratum, mcate, mcate_curve, pct_bias, stratify
from .tmle import (NuisanceFits, TargetedFit, eic_matrix, fit_nuisances,
                   one_step_target, simultaneous_band)

__all__ = [
    "__version__", "backend_name",
    "Subject", "Cohort", "PersonPeriodTable", "validate_cohort",
    "expand_counting_process", "read_cohort_csv", "write_cohort_csv",
    "DgpParams", "TruthHandle", "tau", "true_survival", "true_ite",
    "true_propensity", "generate_cohort", "calibrate_rate",
    "OutcomeModels", "EffectSurface", "fit_outcome_models", "survival_curve",
    "estimate_ite", "nrmse", "nrmse_curve",
    "knee_point", "ImportanceCurve", "SelectionResult", "score_features",
    "select_features", "ppv_tpr", "bootstrap_stability",
    "NuisanceFits", "TargetedFit", "fit_nuisances", "eic_matrix",
    "one_step_target", "simultaneous_band",
    "Stratum", "stratify", "mcate", "mcate_curve", "pct_bias",
]
