"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: ``ConfigError`` -> 2, ``NumericalError``
-> 3, ``SizeCapExceeded`` -> 4.
"""

from __future__ import annotations


class BenignLabError(Exception):
    """Base class for every error raised by this package."""

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(BenignLabError, ValueError):
    """Malformed user input (family strings, rules, flags)."""


class NegativeEigenvalue(ConfigError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"eigenvalue at index {index} is negative ({value!r})")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "index": self.index}


class InvalidRankSequence(ConfigError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"rank sequence entry {index} must exceed 1, got {value!r}")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "index": self.index}


class FiniteRankRequired(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class NumericalError(BenignLabError):
    pass


class BracketTooWide(NumericalError):
    """A tail sum could not be bracketed to the requested tolerance."""

    def __init__(self, lower: float, upper: float, terms: int, tol: float):
        self.lower = lower
        self.upper = upper
        self.terms = terms
        self.tol = tol
        super().__init__(
            f"tail bracket [{lower!r}, {upper!r}] after {terms} terms "
            f"is wider than relative tolerance {tol:g}"
        )

    def to_dict(self) -> dict:
        return {**super().to_dict(), "lower": self.lower, "upper": self.upper}


class RankUndefined(NumericalError):
    """Effective ranks need a positive eigenvalue at position k+1."""

    def __init__(self, k: int):
        self.k = k
        super().__init__(f"effective rank undefined at k={k}: eigenvalue {k + 1} is zero")


class GramSingular(NumericalError):
    def __init__(self, min_eig: float, max_eig: float, rcond: float):
        self.min_eig = min_eig
        self.max_eig = max_eig
        self.rcond = rcond
        super().__init__(
            f"Gram matrix is numerically singular: min eigenvalue {min_eig:.3e}, "
            f"max eigenvalue {max_eig:.3e}, rcond {rcond:.1e}"
        )

    def to_dict(self) -> dict:
        return {**super().to_dict(), "min_eig": self.min_eig, "max_eig": self.max_eig}


class NotApplicable(NumericalError):
    pass


class MonteCarloAborted(NumericalError):
    pass


class SizeCapExceeded(BenignLabError):
    pass
