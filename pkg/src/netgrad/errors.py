"""Exception types shared across the package.

Configuration problems and runtime invariant failures are kept distinct so
that the command line tool can map them to different exit codes.
"""

from __future__ import annotations

__all__ = ["ConfigError", "InvariantViolation"]


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or inconsistent.

    Args:
        message: Human-readable description of the problem.
        field: Name of the offending configuration field, when known.
    """

    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field

    def __str__(self) -> str:
        base = super().__str__()
        if self.field is not None:
            return f"config field '{self.field}': {base}"
        return base


class InvariantViolation(RuntimeError):
    """A runtime self-check failed beyond its tolerance.

    Carries the iteration index at which the check tripped so failures can be
    reported precisely.

    Args:
        message: Description of the violated identity.
        iteration: Iteration counter at the time of the failure.
    """

    def __init__(self, message: str, iteration: int | None = None) -> None:
        super().__init__(message)
        self.iteration = iteration

    def __str__(self) -> str:
        base = super().__str__()
        if self.iteration is not None:
            return f"iteration {self.iteration}: {base}"
        return base
