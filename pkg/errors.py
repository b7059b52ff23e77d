"""Exception hierarchy for hhsharp.

Every class carries the CLI exit code it maps to. Outcomes that are part of
the theory (an infinite sharp constant, an unconverged sweep entry) are
reported as values, not raised.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

from hh_config import ExitCodes

if TYPE_CHECKING:
    from quad import QuadResult


class HHError(Exception):
    """Base class for all hhsharp errors"""
    exit_code: int = ExitCodes.UNEXPECTED


class InputError(HHError, ValueError):
    """Invalid parameters or malformed input"""
    exit_code = ExitCodes.PRECONDITION


class ConfigError(InputError):
    """Experiment config could not be loaded or failed validation"""

    def __init__(self, message: str, failures: list[Any] | None = None) -> None:
        super().__init__(message)
        self.failures = failures or []


class KernelSyntaxError(InputError):
    """Kernel text does not parse"""

    def __init__(self, message: str, offset: int,
                 expected: tuple[str, ...] = ()) -> None:
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected one of: {', '.join(expected)})"
        super().__init__(detail)
        self.offset = offset
        self.expected = expected


class UnknownIdentifierError(InputError):
    """Identifier is neither a variable, a constant nor a function"""

    def __init__(self, name: str, offset: int) -> None:
        super().__init__(f"unknown identifier '{name}' at offset {offset}")
        self.name = name
        self.offset = offset


class KernelDomainError(HHError, ArithmeticError):
    """Expression evaluated outside the real domain"""
    exit_code = ExitCodes.PRECONDITION


class PreconditionError(HHError):
    """Operation called on inputs that violate its precondition"""
    exit_code = ExitCodes.PRECONDITION


class QuadEvaluationError(HHError, ArithmeticError):
    """Integrand produced NaN or Inf at a quadrature node"""
    exit_code = ExitCodes.DIVERGENCE

    def __init__(self, location: float, value: float) -> None:
        super().__init__(f"integrand returned {value} at {location!r}")
        self.location = location
        self.value = value


class DivergenceError(HHError):
    """An integral that must be finite diverged"""
    exit_code = ExitCodes.DIVERGENCE

    def __init__(self, message: str, partial: QuadResult | None = None,
                 s_range: tuple[float, float] | None = None) -> None:
        super().__init__(message)
        self.partial = partial
        self.s_range = s_range
