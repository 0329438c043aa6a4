"""Exception types raised across the package."""


class FracWaveError(Exception):
    """Base class for all package errors."""


class StraddlesZero(FracWaveError, ValueError):
    pass


class ExponentNotIntegrable(FracWaveError, ValueError):
    pass


class NonPositiveRadius(FracWaveError, ValueError):
    pass


class InvalidTimeOrder(FracWaveError, ValueError):
    pass


class ToleranceNotReached(FracWaveError, ArithmeticError):
    pass


class EmptySampleSet(FracWaveError, ValueError):
    pass


class DimensionUnsupported(FracWaveError, ValueError):
    pass


class GridAliasing(FracWaveError, ValueError):
    pass


class InsufficientData(FracWaveError, ValueError):
    pass


class LevelMismatch(FracWaveError, ValueError):
    pass


class TimeGridMismatch(FracWaveError, ValueError):
    pass


class EmptyMask(FracWaveError, ValueError):
    pass


class NotAdmissible(FracWaveError, ValueError):
    pass


class HypothesisViolated(FracWaveError, ValueError):
    pass


class GridMismatch(FracWaveError, ValueError):
    pass


class RegimeMismatch(FracWaveError, ValueError):
    pass


class NoContraction(FracWaveError, ArithmeticError):
    pass


class MaxIterExceeded(FracWaveError, ArithmeticError):
    pass
