"""Exception hierarchy shared by the numerical modules and the CLI."""

from __future__ import annotations


class FracmemError(Exception):
    """Base class for all fracmem errors."""


class ParameterError(FracmemError, ValueError):
    """
    An input violates a documented precondition.

    Args:
        field: Name of the offending parameter or input field.
        message: Human readable description of the violation.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class EmptyMaskError(ParameterError):
    """A shape description selected no cells."""


class EmptyReportError(ParameterError):
    """An experiment had nothing to evaluate (e.g. no overlapping shift)."""


class SolverError(FracmemError, RuntimeError):
    """
    The eigensolver did not meet its residual contract.

    Args:
        message: Description of the failure.
        best_residual: Smallest relative residual reached.
        iterations: Outer iterations performed.
        start_id: Multi-start index the failure belongs to, if any.
    """

    def __init__(
        self,
        message: str,
        best_residual: float,
        iterations: int,
        start_id: int | None = None,
    ) -> None:
        detail = f"{message} (best residual {best_residual:.3e} after {iterations} iterations"
        if start_id is not None:
            detail += f", start {start_id}"
        super().__init__(detail + ")")
        self.best_residual = best_residual
        self.iterations = iterations
        self.start_id = start_id

    def with_start(self, start_id: int) -> "SolverError":
        """Return a copy of this error tagged with a multi-start index."""
        base = str(self).split(" (best residual", 1)[0]
        return SolverError(base, self.best_residual, self.iterations, start_id)
