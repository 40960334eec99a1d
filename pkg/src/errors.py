# src/errors.py
from __future__ import annotations

__all__ = [
    "LatticeError", "DimensionMismatch", "EnumerationTooLarge",
    "InfeasibleAtWindow", "NotGAlphaProfile", "DegenerateEstimate",
    "RecordParseError",
]


class LatticeError(ValueError):
    """Root of every error raised by the toolkit."""


class DimensionMismatch(LatticeError):
    def __init__(self, expected: int, got: int, what: str = "vector"):
        super().__init__(f"{what} has dimension {got}, expected {expected}")
        self.expected = expected
        self.got = got


class EnumerationTooLarge(LatticeError):
    def __init__(self, sites: int, limit: int):
        super().__init__(f"exact enumeration over {sites} driver sites refused (limit {limit})")
        self.sites = sites
        self.limit = limit


class InfeasibleAtWindow(LatticeError):
    """No multi-start reached the residual tolerance; retry with a larger window."""

    def __init__(self, window: int, best_residual: float, report=None):
        super().__init__(
            f"no start reached the tolerance at window {window} "
            f"(best residual {best_residual:.3e})"
        )
        self.window = window
        self.best_residual = best_residual
        self.report = report


class NotGAlphaProfile(LatticeError):
    """A 1D profile whose lags 2..w-1 are not all equal to gamma^2."""


class DegenerateEstimate(LatticeError):
    """Every replica produced the same field statistics; z-scores are undefined."""


class RecordParseError(LatticeError):
    def __init__(self, message: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
