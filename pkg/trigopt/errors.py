"""
Error Types - Exceptions raised by the trigopt toolkit

All library errors derive from TrigoptError so callers can catch the whole
family at once. Validation errors also derive from ValueError:
- DomainError: expression evaluated outside its domain (norm guard, tan pole)
- DimensionError: array or variable-count mismatch
- InvalidBigMError: big-M / lower-bound data that fails the interval check
- ConfigError: invalid configuration, parameters or option values
- PolytopeFormatError: malformed halfspace region file
- SolverError: solver run that produced no usable solution

Numerical outcomes such as local infeasibility are reported through status
enums on the solution objects, not through exceptions.
"""

from typing import Any, Optional


class TrigoptError(Exception):
    """Base class for all trigopt errors."""


class DomainError(TrigoptError, ValueError):
    """Raised when an expression is evaluated outside its domain."""


class DimensionError(TrigoptError, ValueError):
    """Raised on shape or variable-count mismatches."""


class InvalidBigMError(TrigoptError, ValueError):
    """Raised when a big-M constant does not bound its constraint."""


class ConfigError(TrigoptError, ValueError):
    """Raised for invalid run configurations and parameter values."""


class PolytopeFormatError(TrigoptError, ValueError):
    """Raised when a halfspace region file cannot be ingested."""


class SolverError(TrigoptError, RuntimeError):
    """
    Raised when a solver run yields no usable solution.

    Attributes:
        trace: Partial solver trace (homotopy iterations or node log
            records) collected before the failure, if any
    """

    def __init__(self, message: str, trace: Optional[Any] = None) -> None:
        super().__init__(message)
        self.trace = trace
