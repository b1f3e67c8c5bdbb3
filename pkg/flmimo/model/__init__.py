"""Allocation types and closed-form rates.

Keep package-level exports lazy so importing ``flmimo.model.types`` does not
pull in the rate formulas.
"""

__all__ = [
    "Allocation",
    "Infeasible",
    "RateReport",
    "SinrParts",
    "FeasibilityViolation",
    "evaluate",
    "check_feasibility",
]

_TYPES_EXPORTS = {"Allocation", "Infeasible", "RateReport", "SinrParts", "FeasibilityViolation"}
_RATES_EXPORTS = {"evaluate", "check_feasibility"}


def __getattr__(name):
    """Resolve package exports lazily to avoid import-time cycles."""
    if name in _TYPES_EXPORTS:
        from . import types

        return getattr(types, name)
    if name in _RATES_EXPORTS:
        from . import rates

        return getattr(rates, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
