"""Exception hierarchy shared by every plateflow module."""


class PlateflowError(Exception):
    """Base class for all package errors."""


class ConfigError(PlateflowError, ValueError):
    """Invalid channel configuration or initial data."""


class NonMonotoneHeights(ConfigError):
    pass


class WrongFlowCount(ConfigError):
    pass


class NonPositiveGap(ConfigError):
    pass


class NumericalError(PlateflowError, ArithmeticError):
    """A numerical kernel failed; carries the offending wavenumber when known."""

    def __init__(self, message, k=None, t=None):
        self.k = k
        self.t = t
        extra = []
        if k is not None:
            extra.append(f"k={k!r}")
        if t is not None:
            extra.append(f"t={t!r}")
        if extra:
            message = f"{message} ({', '.join(extra)})"
        super().__init__(message)


class ZeroWavenumber(NumericalError, ValueError):
    pass


class SolveFailure(NumericalError):
    pass


class OutOfAsymptoticRange(NumericalError, ValueError):
    pass


class NoConvergence(NumericalError):
    pass


class Overflow(NumericalError, OverflowError):
    pass


class DefectiveMatrix(NumericalError):
    pass


class AliasedData(NumericalError):
    pass


class RealityViolation(NumericalError):
    pass


class InconsistentEvidence(NumericalError):
    pass


class FlatSpectrum(NumericalError):
    pass


class NonConvergentQuadrature(NumericalError):
    pass


class LevelOutOfRange(PlateflowError, ValueError):
    pass


class QuadratureBudgetExceeded(NumericalError):
    pass


class SingularXiSolve(NumericalError):
    pass


class ZeroWavevector(NumericalError, ValueError):
    pass
