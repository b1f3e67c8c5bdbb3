"""Brute-force grid search over allocations for toy instances.

The objective here is coded straight from the closed-form rates, without going
through :mod:`flmimo.model.rates`, so the two can check each other.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import rates
from .model.types import Allocation
from .system.config import SystemConfig, local_frequencies
from .system.layout import ChannelState

logger = logging.getLogger("flmimo.oracle")

MAX_FREE_VARIABLES = 6
DEFAULT_STEPS = 15
DEFAULT_ROUNDS = 3
_SUM_SLACK = 1e-12


@dataclass(frozen=True)
class OracleResult:
    allocation: Optional[Allocation]
    min_eff_rate: float
    round_best: Tuple[float, ...]
    evaluated: int

    @property
    def feasible(self) -> bool:
        return self.allocation is not None


def free_variable_count(cfg: SystemConfig) -> int:
    return 2 * cfg.L + 3 * cfg.K + 1


def power_axis(steps: int) -> np.ndarray:
    """Power coefficients: log-spaced on [1e-3, 0.1), linear on [0.1, 1]."""
    log_steps = max(1, steps // 3)
    low = np.logspace(-3.0, -1.0, log_steps, endpoint=False)
    high = np.linspace(0.1, 1.0, max(2, steps - log_steps))
    return np.concatenate([low, high])


def frequency_axis(cfg: SystemConfig, steps: int) -> np.ndarray:
    span = cfg.f_max - cfg.f_min
    return np.linspace(cfg.f_min + span / steps, cfg.f_max, steps)


def grid_objective(points: np.ndarray, ch: ChannelState, cfg: SystemConfig) -> np.ndarray:
    """Min effective rate (bit/s) of every row of ``points``; ``-inf`` where infeasible.

    Columns follow ``eta_d, zeta_1, zeta_2, eta_u, zeta_3, f``.
    """
    L, K = cfg.L, cfg.K
    P = np.atleast_2d(np.asarray(points, dtype=float))
    edges = np.cumsum([0, L, K, K, L, K])
    eta_d, zeta_1, zeta_2, eta_u, zeta_3 = (P[:, edges[i]:edges[i + 1]] for i in range(5))
    f = P[:, edges[5]]

    rho_d, rho_u = cfg.rho_d, cfg.rho_u
    b_fl, b_nfl = ch.beta_fl, ch.beta_nfl
    s1_load = (eta_d.sum(axis=1) + zeta_1.sum(axis=1))[:, None]
    s2_load = zeta_2.sum(axis=1)[:, None]
    s3_load = zeta_3.sum(axis=1)[:, None]
    uplink_leak = ((b_fl - ch.sigma2_u) * eta_u).sum(axis=1)[:, None]

    zf_s1 = cfg.M - L - K
    gamma_d = rho_d * eta_d * zf_s1 * ch.sigma2_d / (1 + rho_d * (b_fl - ch.sigma2_d) * s1_load)
    gamma_1 = rho_d * zeta_1 * zf_s1 * ch.sigma2_1 / (1 + rho_d * (b_nfl - ch.sigma2_1) * s1_load)
    gamma_2 = rho_d * zeta_2 * (cfg.M - K) * ch.sigma2_2 / (1 + rho_d * (b_nfl - ch.sigma2_2) * s2_load)
    gamma_u = rho_u * eta_u * (cfg.M - L) * ch.sigma2_u / (1 + rho_u * uplink_leak)
    gamma_3 = rho_d * zeta_3 * (cfg.M - K) * ch.sigma2_3 / (1 + rho_d * (b_nfl - ch.sigma2_3) * s3_load)

    def rate(gamma, tau, band):
        return (cfg.tau_c - tau) / cfg.tau_c * band * np.log1p(gamma) / np.log(2.0)

    r_d = rate(gamma_d, cfg.tau_dp, cfg.B).min(axis=1)
    r_1 = rate(gamma_1, cfg.tau_1p, cfg.B)
    r_2 = rate(gamma_2, cfg.tau_2p, cfg.B)
    r_u = rate(gamma_u, cfg.tau_up, cfg.B / 2).min(axis=1)
    r_3 = rate(gamma_3, cfg.tau_3p, cfg.B / 2)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_d = cfg.S_d / r_d
        t_c = cfg.N_c * cfg.D_bar * cfg.c_bar / f
        t_u = cfg.S_u / r_u
        total = t_d + t_c + t_u
        received = r_1 * t_d[:, None] + r_2 * t_c[:, None] + r_3 * t_u[:, None]
        value = (received / total[:, None]).min(axis=1)

    f_local_min = f * float(local_frequencies(1.0, cfg).min())
    feasible = (
        (s1_load[:, 0] <= 1 + _SUM_SLACK)
        & (s2_load[:, 0] <= 1 + _SUM_SLACK)
        & (s3_load[:, 0] <= 1 + _SUM_SLACK)
        & np.all(eta_u <= 1 + _SUM_SLACK, axis=1)
        & (f > cfg.f_min)
        & (f_local_min > cfg.f_min)
        & (f <= cfg.f_max)
        & np.isfinite(total)
        & (total <= cfg.t_qos)
    )
    return np.where(feasible, value, -np.inf)


def _to_point(a: Allocation) -> np.ndarray:
    return np.concatenate([a.eta_d, a.zeta_1, a.zeta_2, a.eta_u, a.zeta_3, [a.f]])


def _to_allocation(point: np.ndarray, cfg: SystemConfig) -> Allocation:
    edges = np.cumsum([0, cfg.L, cfg.K, cfg.K, cfg.L, cfg.K])
    blocks = [point[edges[i]:edges[i + 1]] for i in range(5)]
    return Allocation(*blocks, f=float(point[-1]))


def _refine(axis: np.ndarray, center: float, steps: int) -> np.ndarray:
    i = int(np.argmin(np.abs(axis - center)))
    lo = axis[max(i - 1, 0)]
    hi = axis[min(i + 1, axis.size - 1)]
    return np.union1d(np.linspace(min(lo, center), max(hi, center), steps), [center])


def _sweep(
    axes: List[np.ndarray],
    ch: ChannelState,
    cfg: SystemConfig,
    best_value: float,
    best_point: Optional[np.ndarray],
) -> Tuple[float, Optional[np.ndarray], int]:
    """Scan the full product grid in C order; only a strictly better point replaces the incumbent."""
    split = min(2, len(axes) - 1)
    outer_axes, inner_axes = axes[:split], axes[split:]
    inner = np.stack(np.meshgrid(*inner_axes, indexing="ij"), axis=-1).reshape(-1, len(inner_axes))
    rows = inner.shape[0]
    evaluated = 0
    for prefix in itertools.product(*outer_axes):
        block = np.column_stack([np.tile(np.asarray(prefix, dtype=float), (rows, 1)), inner])
        values = grid_objective(block, ch, cfg)
        evaluated += rows
        j = int(np.argmax(values))
        if values[j] > best_value:
            best_value = float(values[j])
            best_point = block[j].copy()
    return best_value, best_point, evaluated


def grid_search(
    ch: ChannelState,
    cfg: SystemConfig,
    steps: int = DEFAULT_STEPS,
    rounds: int = DEFAULT_ROUNDS,
    incumbents: Sequence[Allocation] = (),
) -> OracleResult:
    """Exhaustive search on a coarse grid, then ``rounds - 1`` zoomed grids around the incumbent.

    ``incumbents`` are feasible allocations the result must not fall below.
    """
    dims = free_variable_count(cfg)
    if dims > MAX_FREE_VARIABLES:
        raise ValueError(
            f"grid search handles at most {MAX_FREE_VARIABLES} free variables, got {dims} (L={cfg.L}, K={cfg.K})."
        )
    if steps < 3 or rounds < 1:
        raise ValueError("steps must be at least 3 and rounds at least 1.")

    best_value = -np.inf
    best_point: Optional[np.ndarray] = None
    for candidate in incumbents:
        point = _to_point(candidate)
        value = float(grid_objective(point[None, :], ch, cfg)[0])
        if value > best_value:
            best_value, best_point = value, point

    axes = [power_axis(steps) for _ in range(dims - 1)] + [frequency_axis(cfg, steps)]
    round_best: List[float] = []
    evaluated = 0
    for round_index in range(rounds):
        best_value, best_point, count = _sweep(axes, ch, cfg, best_value, best_point)
        evaluated += count
        round_best.append(best_value)
        logger.debug("round %d: best=%.9g over %d points", round_index + 1, best_value, count)
        if best_point is None:
            break
        axes = [_refine(axis, best_point[i], steps) for i, axis in enumerate(axes)]

    if best_point is None:
        return OracleResult(None, 0.0, tuple(round_best), evaluated)

    allocation = _to_allocation(best_point, cfg)
    violations = rates.check_feasibility(allocation, ch, cfg)
    if violations:
        logger.warning("grid optimum fails the exact feasibility check: %s", violations)
    report = rates.evaluate(allocation, ch, cfg)
    return OracleResult(allocation, report.min_eff_rate, tuple(round_best), evaluated)
