"""Exception types raised across the package."""


class RbnError(Exception):
    """Base class for all package errors."""


class InvalidDag(RbnError):
    pass


class DimensionTooLarge(RbnError):
    pass


class DimensionMismatch(RbnError):
    pass


class DagMismatch(RbnError):
    pass


class InvalidBalance(RbnError):
    pass


class LengthMismatch(RbnError):
    pass


class Inconsistent(RbnError):
    """An F-vector whose active coordinate is not a bit."""


class NotUnit(RbnError):
    pass


class NotSymmetric(RbnError):
    pass


class IdenticalDistributions(RbnError):
    pass


class InvalidShift(RbnError):
    pass


class EmptyDataset(RbnError):
    pass


class ZeroAlpha(RbnError):
    pass


class NoConvergence(RbnError):
    pass


class NoThresholdFound(RbnError):
    pass


class SampleBudgetExhausted(RbnError):
    pass


class InfeasibleTopology(RbnError):
    pass


class FormatError(RbnError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
