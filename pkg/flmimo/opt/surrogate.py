"""Convex inner-approximation bounds used to build each SCA subproblem.

Every rate in the model has the form ``prelog * ln(1 + x/y)`` with ``x`` (the
SINR numerator) and ``y`` (the SINR denominator) affine in the power
coefficients.  Around an expansion point ``(x_n, y_n)``:

* :func:`log_lower_bound` is concave, tight at the point and never above the
  true rate, so ``r <= lower`` is a safe (convex) replacement of ``r <= R``.
* :func:`log_upper_bound` is convex, tight and never below the true rate, so
  ``upper <= r_cap`` is a safe replacement of ``R <= r_cap``.
* :func:`bilinear_upper_bound` majorizes ``u * v`` and is tight at ``(u_n, v_n)``.

Inside the subproblem rates are carried in Mbit/s, frequencies in GHz, data
in Mbit and cycles in Gcycles (see the ``*_UNIT`` constants).
"""

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from ..model import rates
from ..model.types import Allocation
from ..system.config import SystemConfig
from ..system.layout import ChannelState
from .cvxsolve import ConvexProgram
from .expressions import Affine, Expr, VariableLayout, reciprocal, quad_over_linear, square

RATE_UNIT = 1e6
BIT_UNIT = 1e6
FREQ_UNIT = 1e9
CYCLE_UNIT = 1e9


def sca_layout(L: int, K: int) -> VariableLayout:
    """Variable vector of the SCA subproblem: powers, frequency, then every auxiliary."""
    return VariableLayout(
        (
            ("eta_d", L),
            ("zeta_1", K),
            ("zeta_2", K),
            ("eta_u", L),
            ("zeta_3", K),
            ("f", 1),
            ("t", 1),
            ("t_q", 1),
            ("z", 1),
            ("r_d", 1),
            ("r_u", 1),
            ("a_1", 1),
            ("a_2", 1),
            ("a_3", 1),
            ("r_1", K),
            ("r_2", K),
            ("r_3", K),
            ("rt_d", 1),
            ("rt_u", 1),
        )
    )


@dataclass(frozen=True)
class LinearRatioTerm:
    """``prelog * ln(1 + x/y)`` with affine ``x``, ``y`` and their values at the expansion point."""

    x: Affine
    y: Affine
    x_n: float
    y_n: float
    prelog: float
    label: str = ""

    def __post_init__(self):
        if not self.x_n > 0.0 or not self.y_n > 0.0:
            raise ValueError(
                f"expansion point of {self.label or 'term'} must be strictly interior "
                f"(x_n={self.x_n!r}, y_n={self.y_n!r})."
            )

    def exact(self, point: np.ndarray) -> float:
        return self.prelog * math.log1p(self.x(point) / self.y(point))


def log_lower_bound(term: LinearRatioTerm) -> Expr:
    """Concave minorant of ``prelog * ln(1 + x/y)``, tight at ``(x_n, y_n)``."""
    x_n, y_n, c = term.x_n, term.y_n, term.prelog
    s = x_n + y_n
    const = c * (math.log1p(x_n / y_n) + 2.0 * x_n / s)
    linear = term.y * (-c * x_n / (s * y_n)) + const
    return Expr(linear) + reciprocal(-c * x_n * x_n / s, term.x)


def log_upper_bound(term: LinearRatioTerm) -> Expr:
    """Convex majorant of ``prelog * ln(1 + x/y)``, tight at ``(x_n, y_n)``."""
    x_n, y_n, c = term.x_n, term.y_n, term.prelog
    s = x_n + y_n
    const = c * (math.log1p(x_n / y_n) - x_n / s)
    curved = quad_over_linear(c * y_n / (2.0 * s * x_n), term.x, term.y)
    curved = curved + reciprocal(c * y_n * x_n / (2.0 * s), term.y)
    return curved + const


def bilinear_upper_bound(u: Affine, v: Affine, u_n: float, v_n: float) -> Expr:
    """Convex majorant of ``u * v``, tight at ``(u_n, v_n)``."""
    gap = u_n - v_n
    return square(0.25, u + v) + (u - v) * (-0.5 * gap) + 0.25 * gap * gap


@dataclass(frozen=True)
class SurrogateTerms:
    fl_downlink: Tuple[LinearRatioTerm, ...]
    fl_uplink: Tuple[LinearRatioTerm, ...]
    nfl_s1: Tuple[LinearRatioTerm, ...]
    nfl_s2: Tuple[LinearRatioTerm, ...]
    nfl_s3: Tuple[LinearRatioTerm, ...]

    def __iter__(self) -> Iterator[LinearRatioTerm]:
        for group in (self.fl_downlink, self.fl_uplink, self.nfl_s1, self.nfl_s2, self.nfl_s3):
            yield from group


def _scaled_prelog(cfg: SystemConfig, tau: int, half_band: bool = False) -> float:
    return rates.prelog(cfg, tau, half_band) / RATE_UNIT / rates.LN2


def build_terms(
    allocation: Allocation,
    ch: ChannelState,
    cfg: SystemConfig,
    layout: Optional[VariableLayout] = None,
) -> SurrogateTerms:
    """Every rate of the round as a :class:`LinearRatioTerm` expanded at ``allocation``."""
    layout = layout or sca_layout(cfg.L, cfg.K)
    L, K = cfg.L, cfg.K
    s1_load = layout.block_sum("eta_d") + layout.block_sum("zeta_1")
    s2_load = layout.block_sum("zeta_2")
    s3_load = layout.block_sum("zeta_3")

    def terms(parts, label, count, numerator_of, denominator_of, tau, half_band=False):
        x_n, y_n = parts(allocation, ch, cfg)
        prelog = _scaled_prelog(cfg, tau, half_band)
        return tuple(
            LinearRatioTerm(
                x=numerator_of(i),
                y=denominator_of(i),
                x_n=float(x_n[i]),
                y_n=float(y_n[i]),
                prelog=prelog,
                label=f"{label}[{i}]",
            )
            for i in range(count)
        )

    s1_gain = cfg.rho_d * (cfg.M - L - K)
    dl_gain = cfg.rho_d * (cfg.M - K)
    uplink_leak = np.zeros(layout.size)
    uplink_leak[layout.slice("eta_u")] = cfg.rho_u * (ch.beta_fl - ch.sigma2_u)
    uplink_interference = Affine(uplink_leak, 1.0)

    return SurrogateTerms(
        fl_downlink=terms(
            rates.s1_fl_parts, "fl_downlink", L,
            lambda l: layout.variable("eta_d", l) * (s1_gain * ch.sigma2_d[l]),
            lambda l: s1_load * (cfg.rho_d * (ch.beta_fl[l] - ch.sigma2_d[l])) + 1.0,
            cfg.tau_dp,
        ),
        fl_uplink=terms(
            rates.s3_ul_parts, "fl_uplink", L,
            lambda l: layout.variable("eta_u", l) * (cfg.rho_u * (cfg.M - L) * ch.sigma2_u[l]),
            lambda l: uplink_interference,
            cfg.tau_up,
            half_band=True,
        ),
        nfl_s1=terms(
            rates.s1_nfl_parts, "nfl_s1", K,
            lambda k: layout.variable("zeta_1", k) * (s1_gain * ch.sigma2_1[k]),
            lambda k: s1_load * (cfg.rho_d * (ch.beta_nfl[k] - ch.sigma2_1[k])) + 1.0,
            cfg.tau_1p,
        ),
        nfl_s2=terms(
            rates.s2_parts, "nfl_s2", K,
            lambda k: layout.variable("zeta_2", k) * (dl_gain * ch.sigma2_2[k]),
            lambda k: s2_load * (cfg.rho_d * (ch.beta_nfl[k] - ch.sigma2_2[k])) + 1.0,
            cfg.tau_2p,
        ),
        nfl_s3=terms(
            rates.s3_dl_parts, "nfl_s3", K,
            lambda k: layout.variable("zeta_3", k) * (dl_gain * ch.sigma2_3[k]),
            lambda k: s3_load * (cfg.rho_d * (ch.beta_nfl[k] - ch.sigma2_3[k])) + 1.0,
            cfg.tau_3p,
            half_band=True,
        ),
    )


def dump_program(program: ConvexProgram) -> str:
    """Human-readable listing of a subproblem, one constraint per line."""
    names = program.layout.names()
    lines = [f"maximize {program.objective.describe(names)}", "subject to"]
    for constraint in program.constraints:
        lines.append(f"  [{constraint.tag}] {constraint.expr.describe(names)} <= 0")
    return "\n".join(lines) + "\n"
