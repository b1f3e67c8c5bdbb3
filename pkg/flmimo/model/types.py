"""Value types passed between the rate model, the optimizer and the harness."""

from dataclasses import dataclass
from typing import Union

import numpy as np

_ALLOCATION_VECTORS = ("eta_d", "zeta_1", "zeta_2", "eta_u", "zeta_3")


def _frozen_vector(values) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Allocation:
    """Power coefficients of every phase plus the frequency control coefficient ``f`` (cycles/s)."""

    eta_d: np.ndarray
    zeta_1: np.ndarray
    zeta_2: np.ndarray
    eta_u: np.ndarray
    zeta_3: np.ndarray
    f: float

    def __post_init__(self):
        for name in _ALLOCATION_VECTORS:
            object.__setattr__(self, name, _frozen_vector(getattr(self, name)))
        object.__setattr__(self, "f", float(self.f))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Allocation):
            return NotImplemented
        return self.f == other.f and all(
            np.array_equal(getattr(self, name), getattr(other, name)) for name in _ALLOCATION_VECTORS
        )

    def __hash__(self):
        return hash((self.f,) + tuple(tuple(getattr(self, name)) for name in _ALLOCATION_VECTORS))

    def as_dict(self) -> dict:
        row = {}
        for name in _ALLOCATION_VECTORS:
            for index, value in enumerate(getattr(self, name)):
                row[f"{name}_{index}"] = float(value)
        row["f"] = self.f
        return row


@dataclass(frozen=True)
class SinrParts:
    """Numerator and denominator of one SINR, kept apart for the surrogate bounds."""

    numerator: float
    denominator: float

    @property
    def value(self) -> float:
        return self.numerator / self.denominator


@dataclass(frozen=True, eq=False)
class RateReport:
    """Every rate, delay and data volume of one FL round (bit/s, s, bits)."""

    r_d_fl: np.ndarray
    r_d_group: float
    r_1: np.ndarray
    r_2: np.ndarray
    r_u_fl: np.ndarray
    r_u_group: float
    r_3: np.ndarray
    t_d: float
    t_c: float
    t_u: float
    d_1: np.ndarray
    d_2: np.ndarray
    d_3: np.ndarray
    eff_rate: np.ndarray
    min_eff_rate: float

    @property
    def round_time(self) -> float:
        return self.t_d + self.t_c + self.t_u


@dataclass(frozen=True)
class FeasibilityViolation:
    """One violated constraint; ``residual`` is how far past its bound the allocation sits."""

    constraint: str
    residual: float


@dataclass(frozen=True)
class Infeasible:
    """Returned instead of an allocation or a state when none exists."""

    reason: str


MaybeAllocation = Union[Allocation, Infeasible]
