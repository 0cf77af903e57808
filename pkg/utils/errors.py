"""
Exception hierarchy for the fractional resolvent toolkit.

Library code raises these; only the CLI orchestrator and the verification
runner translate them into exit codes or failed check rows.
"""


class FracResError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class ValidationError(FracResError):
    """Inputs rejected before any computation (CLI exit 2)."""

    exit_code = 2


class ParameterError(ValidationError):
    """A parameter lies outside its admissible range."""


class DomainError(ValidationError):
    """A point lies outside the domain of a function (e.g. t <= 0)."""


class SymbolicDeltaError(ValidationError):
    """g_0 is the Dirac delta and is never evaluated numerically."""


class GridError(ValidationError):
    """Time grid is non-uniform, unsorted or does not start at zero."""


class MatrixFormatError(ValidationError):
    """Matrix text does not follow the dim-then-rows format."""


class NumericalError(FracResError):
    """A computation could not reach its tolerance (CLI exit 3)."""

    exit_code = 3


class RegimeFailure(NumericalError):
    """No Mittag-Leffler evaluation regime covers the requested point."""


class WrightTruncationError(NumericalError):
    """Wright series requested outside the cancellation-safe disc."""


class EigenvalueCollisionError(NumericalError):
    """Resolvent requested at a point within the margin of the spectrum."""


class NegativeSpectrumError(NumericalError):
    """Operator has spectrum on the negative real axis."""


class SectorialityError(NumericalError):
    """Operator is not sectorial of the angle an operation needs."""


class ContourError(NumericalError):
    """Integration contour passes too close to the spectrum."""


class QuadratureError(NumericalError):
    """Quadrature did not converge."""


class TailBoundError(NumericalError):
    """Truncation tail of an improper integral exceeds tolerance."""


class SeriesDivergenceError(NumericalError):
    """Power series guard tripped (argument too large for safe summation)."""


class SpectralMethodError(NumericalError):
    """Spectral route requested for a non-diagonalizable operator."""


class ExtrapolationError(NumericalError):
    """Richardson iterates for the zero-spectrum limit diverge."""


class IntegratorError(NumericalError):
    """ODE integrator failed."""


class GridTooCoarseError(NumericalError):
    """Finite-difference error estimate exceeds tolerance on this grid."""


class ToleranceError(NumericalError):
    """A verification residual exceeds its threshold."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code contract."""
    if isinstance(exc, FracResError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return 4
    if isinstance(exc, (ValueError, TypeError)):
        return 2
    return 3
