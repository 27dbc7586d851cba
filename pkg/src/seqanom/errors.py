"""Exception types raised across the package."""


class SeqAnomError(Exception):
    """Base class for all package-specific errors."""


class InvalidModelError(SeqAnomError, ValueError):
    """A source model is degenerate (e.g. identical hypotheses)."""


class UndefinedSummaryError(SeqAnomError, ValueError):
    """A KL summary was requested on the side where it does not exist
    (anomalous side of the empty set, normal side of the full set)."""


class UnsupportedRuleError(SeqAnomError, ValueError):
    """A sampling rule was configured outside its domain
    (e.g. fixed-size rules with a non-integer budget)."""


class CombinatorialBlowupError(SeqAnomError, ValueError):
    """The candidate-set family is too large to materialize eagerly."""


class CalibrationError(SeqAnomError, RuntimeError):
    """Threshold calibration failed to bracket the target error rate."""


class DegenerateReportError(SeqAnomError, RuntimeError):
    """All trials of an estimation run were censored at the horizon."""


class ConfigError(SeqAnomError, ValueError):
    """An experiment configuration file is malformed or inconsistent."""
