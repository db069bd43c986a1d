"""
Exception hierarchy shared by the services and the command-line front end
"""
from typing import Any, Dict, List, Optional


class ToolkitError(Exception):
    """Base class for all errors raised by the toolkit"""

    exit_code: int = 1


class ConfigError(ToolkitError):
    """Invalid configuration or unusable output location"""

    exit_code = 2


class DataError(ToolkitError):
    """Malformed or inconsistent input data"""

    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AlignmentError(DataError):
    """Series that should share a calendar do not"""


class EstimatorError(ToolkitError):
    """An estimator could not produce a result"""

    exit_code = 4


class RankDeficiencyError(EstimatorError):
    """Design matrix is not of full column rank"""

    def __init__(self, message: str, columns: Optional[List[str]] = None):
        self.columns = list(columns or [])
        if self.columns:
            message = f"{message} (collinear columns: {', '.join(self.columns)})"
        super().__init__(message)


class SolverError(EstimatorError):
    """Root finding or optimization failed"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            detail = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} [{detail}]"
        super().__init__(message)


class EmptyPoolError(EstimatorError):
    """Placebo candidate pool is empty after matching and exclusion"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, int]] = None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            detail = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} [{detail}]"
        super().__init__(message)


class NoElbowError(EstimatorError):
    """Response curve has no curvature to locate"""


class TrimmingError(EstimatorError):
    """Every threshold candidate violates the trimming rule"""


class WindowError(EstimatorError):
    """Panel window does not match the requested event window"""


class DomainError(ToolkitError, ValueError):
    """Argument outside the mathematical domain of a model function"""

    exit_code = 4
