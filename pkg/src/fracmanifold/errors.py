"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FracManifoldError(Exception):
    """Base class for all errors raised by :mod:`fracmanifold`."""


class ValidationError(FracManifoldError, ValueError):
    """Input data violates a documented invariant (bad shape, bad order, ...)."""


class NumericalError(FracManifoldError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class DomainError(ValidationError):
    """Argument outside the domain where an approximation is valid."""


class ShapeError(ValidationError):
    """Matrix argument does not have the required (block) structure."""


class NonConvergence(NumericalError):
    """A series or iteration failed to reach its tolerance."""


class NoConvergence(NonConvergence):
    """The Lyapunov-Perron fixed-point iteration did not contract."""

    def __init__(self, message: str, *, sample: int | None = None) -> None:
        super().__init__(message)
        self.sample = sample


class NotHyperbolic(NumericalError):
    """An eigenvalue lies on (or too close to) the critical sector boundary."""

    def __init__(self, message: str, eigenvalue: complex) -> None:
        super().__init__(message)
        self.eigenvalue = eigenvalue


class IllConditioned(NumericalError):
    """The Jordan structure of a matrix cannot be resolved reliably."""


class NoValidRadius(NumericalError):
    """No ball radius satisfies the contraction condition."""


class Unbounded(NumericalError):
    """An operator iterate left the region where it is meaningful."""


class StepOverflow(NumericalError):
    """A time-stepping solution exceeded its overflow guard."""

    def __init__(self, message: str, *, step: int, time: float) -> None:
        super().__init__(message)
        self.step = step
        self.time = time


class MLOverflow(NumericalError, OverflowError):
    """A Mittag-Leffler value is too large to be represented."""
