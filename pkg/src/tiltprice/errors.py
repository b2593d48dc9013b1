"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems are exit 3,
numerical failures (no solution, degenerate inputs) are exit 4.
"""

from __future__ import annotations


class TiltPriceError(Exception):
    """Base class for all package errors."""


class ValidationError(TiltPriceError):
    """Invalid specification, parameter or domain (CLI exit 3)."""


class TableRangeError(ValidationError):
    """Tabulated function queried outside its grid."""


class InvalidUtilityError(ValidationError):
    """Utility data fails a structural requirement (e.g. non-concave table)."""


class NumericalError(TiltPriceError):
    """A numerical procedure could not produce a result (CLI exit 4)."""


class NoSolutionError(NumericalError):
    """Root finding failed; the message names the violated bound."""


class DegenerateClaimError(NumericalError):
    """Constant claim where a non-degenerate one is required."""


class DegenerateParameterError(NumericalError):
    """Parameter value at which a formula degenerates (e.g. gamma*alpha = 0)."""


class BracketError(NumericalError):
    """Bisection bracket does not change sign; carries diagnostics."""


class ClampBudgetError(NumericalError):
    """Too many simulated path points left the state interval."""
