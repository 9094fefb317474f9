"""
Exceptions Module

Error hierarchy for the toolkit. Every stage error carries the exit code the
CLI reports for it.
"""

from typing import Any, Dict, Optional


class ToolkitError(ValueError):
    """Base class for all toolkit errors."""

    exit_code = 1
    stage = 'toolkit'


class ConfigError(ToolkitError):
    """Invalid settings file or command-line flag combination."""

    exit_code = 1
    stage = 'config'


class IngestError(ToolkitError):
    """Raised when daily or monthly input cannot be turned into a series."""

    exit_code = 1
    stage = 'parse'


class ParseError(IngestError):
    """Malformed input row."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TransformError(ToolkitError):
    """Raised by transforms, correlograms and imputation."""

    exit_code = 2
    stage = 'transform'


class AcfDomainError(TransformError):
    """The sample ACF is undefined for the given series."""


class ConditioningError(TransformError):
    """The Durbin-Levinson recursion hit a near-zero denominator."""

    def __init__(self, lag: int, denominator: float):
        self.lag = lag
        self.denominator = denominator
        super().__init__(
            f"PACF recursion is ill-conditioned at lag {lag} "
            f"(denominator {denominator:.3e})"
        )


class NonPositivePhi(TransformError):
    """Estimated filter correlation lies outside (0, 1)."""

    def __init__(self, phi: float):
        self.phi = phi
        super().__init__(
            f"lag-1 autocorrelation {phi:.6f} is not in (0, 1); "
            f"supply phi manually (--phi)"
        )


class ImputationError(TransformError):
    """A hole cannot be filled with the requested strategy."""


class FitError(ToolkitError):
    """Raised when a model cannot be estimated or used."""

    exit_code = 3
    stage = 'fit'


class ConvergenceError(FitError):
    """The optimizer hit its iteration cap."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class ConstraintError(FitError):
    """Coefficients leave the stationarity/invertibility region."""


class ForecastError(FitError):
    """Forecasting preconditions are not met."""


class DiagnosticsError(ToolkitError):
    """Raised by residual diagnostics and accuracy evaluation."""

    exit_code = 4
    stage = 'diagnose'


class ReportIOError(ToolkitError):
    """Reading or writing a report failed."""

    exit_code = 5
    stage = 'io'
