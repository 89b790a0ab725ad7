"""Exception hierarchy shared by every module.

The CLI maps each family onto one exit code, so new errors should subclass
one of the three roots below.
"""


class RobinLabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(RobinLabError, ValueError):
    """Invalid input: bad grid size, malformed config, mismatched metadata."""


class MetadataMismatch(ConfigurationError):
    """Operands disagree on grid, alpha, energy or dimension."""


class HypothesisViolation(ConfigurationError):
    """An operation was called outside the hypotheses it is valid for."""


class UnsupportedMode(ConfigurationError):
    """Requested mode exists in principle but is not implemented."""


class SpectralConditionError(RobinLabError):
    """E sits (numerically) on the Robin spectrum, so the map is undefined."""

    def __init__(self, message, sigma=None, threshold=None):
        super().__init__(message)
        self.sigma = sigma
        self.threshold = threshold


class ConvergenceError(RobinLabError):
    """An iterative procedure exhausted its budget."""


class AsymptoticRegimeError(ConvergenceError):
    """CGO fixed point failed to converge: |lambda| is too small."""


class RangeError(ConvergenceError):
    """Exponential growth factor would overflow double precision."""
