"""Exception hierarchy shared by every stage of the pipeline.

Each class carries the process exit code the CLI maps it to.
"""

from __future__ import annotations


class ClubConvError(Exception):
    exit_code = 1


class PanelError(ClubConvError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class DegenerateError(ClubConvError, ArithmeticError):
    """A numeric quantity the computation depends on is degenerate.

    Examples are a constant series in a correlation, an exact factor fit,
    or a panel whose members are already identical (zero dispersion).
    """

    exit_code = 4


class InvalidInputError(ClubConvError, ValueError):
    """An argument violates an operation's precondition."""

    exit_code = 3
