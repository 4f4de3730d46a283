"""Exception types shared across the toolkit."""


class GapgradError(Exception):
    """Base class for all toolkit errors."""


class InputError(GapgradError, ValueError):
    """Invalid argument or configuration value."""


class UnsupportedDimensionError(GapgradError):
    """Requested dimension has no solver (only the circle case d=3 ships)."""


class ConvergenceError(GapgradError):
    """Iterative solve failed to reach tolerance.

    Carries the relative residual history so callers can diagnose stalls.
    """

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class GridResolutionError(GapgradError):
    """Grid too coarse to resolve the requested length scale."""


class QuadratureError(GapgradError):
    """Numerical integration did not converge or the integral diverges."""


class ParityError(GapgradError):
    """Weight lacks the reflection symmetry a parity operation requires."""


class ExperimentError(GapgradError):
    """A verification experiment produced a structurally invalid result."""
