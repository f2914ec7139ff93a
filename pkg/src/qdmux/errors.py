"""Exception hierarchy shared across the package.

``ValidationError`` covers bad configuration, program, or argument input
(CLI exit code 1).  ``FitNonConvergence`` and its subclasses flag analysis
steps that failed to produce a usable fit (CLI exit code 3 when nothing else
went wrong).  Anything else is a runtime failure (exit code 2).
"""

from __future__ import annotations


class ValidationError(ValueError):
    """Invalid configuration, program, or argument input."""


class FitNonConvergence(RuntimeError):
    """A fitting routine failed; carries the residual norm when known."""

    def __init__(self, message: str, residual_norm: float | None = None):
        super().__init__(message)
        self.residual_norm = residual_norm


class DipNotFound(FitNonConvergence):
    """Spectrum handed to the resonance fitter contains no usable dip."""


class CalibrationError(RuntimeError):
    """Resonator calibration did not converge; carries the residual vector."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals
