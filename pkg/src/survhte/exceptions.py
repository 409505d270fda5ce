"""Exception types shared across the package."""


class SurvhteError(Exception):
    """Base class for survhte errors."""


class CohortValidationError(SurvhteError):
    """Raised when ingested rows violate the cohort contract.

    Carries ``violations``: a list of (row_index, rule) pairs describing
    every problem found, not just the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(f"row {i}: {rule}" for i, rule in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"invalid cohort: {lines}{more}")


class DimensionError(SurvhteError):
    """Input dimensions do not match what a fitted object expects."""


class CalibrationError(SurvhteError):
    """Event-rate calibration could not bracket or reach the target."""


class SingularFitError(SurvhteError):
    """A base learner failed to converge or produced a singular system."""


class AllLearnersFailed(SurvhteError):
    """Every base learner in a stack raised during fitting."""


class EmptyArmError(SurvhteError):
    """A treatment arm has no subjects."""


class NoEventsError(SurvhteError):
    """A treatment arm has no observed events, so its hazard is unidentified."""


class DegenerateNormalizer(SurvhteError):
    """NRMSE normalizer |mean estimated effect| is numerically zero."""


class FitError(SurvhteError):
    """An importance scorer's underlying model failed to fit."""


class NoKnee(SurvhteError):
    """The importance curve has no knee (e.g. perfectly linear scores)."""


class NonFiniteUpdate(SurvhteError):
    """A targeting step produced non-finite hazards; carries the step index."""

    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite targeting update at step {step}")


class DegenerateCovariance(SurvhteError):
    """All influence-curve columns have zero variance; no band can be formed."""


class InvalidBreaks(SurvhteError):
    """Stratification breaks are empty, unordered, or outside the support."""


class EmptyStratum(SurvhteError):
    """A stratum has no members."""


class DegenerateDenominator(SurvhteError):
    """Percentage bias denominator |estimate| is numerically zero."""
