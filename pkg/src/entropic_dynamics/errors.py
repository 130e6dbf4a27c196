"""Exception hierarchy shared by the library and the command-line harness."""
from __future__ import annotations


class EntropicError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(EntropicError, ValueError):
    """Malformed or inconsistent scenario description.

    ``line`` is the 1-based line of the configuration file the problem was
    traced to, or ``None`` when the scenario was built programmatically.
    """

    exit_code = 2

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.message = message
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class NumericalError(EntropicError, ArithmeticError):
    """A solver produced non-finite values or hit an undefined operation."""

    exit_code = 3

    def __init__(self, message: str, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class SingularityError(NumericalError):
    """Density dropped below the floor inside the support (a node)."""


class NodeError(NumericalError):
    """Phase of a wave function is undefined because it has a node."""

    def __init__(self, message: str, location=None):
        super().__init__(message)
        self.location = location


class InvariantViolation(EntropicError):
    """A conserved quantity or structural invariant failed mid-run."""

    exit_code = 4
