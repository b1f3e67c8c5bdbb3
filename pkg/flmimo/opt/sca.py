"""Successive convex approximation of the max-min effective-rate problem.

The ratio objective is written in epigraph form with auxiliaries

    z * t_q <= t                                   (z is the rate being maximized)
    t <= a_1 S_d + a_2 C + a_3 S_u                 (bits every non-FL UE receives)
    S_d / r_d + C / f + S_u / r_u <= t_q <= t_qos  (round duration)
    r_d <= R_d,l    r_u <= R_u,l                   (FL group rates)
    a_1 rt_d <= r_1,k   a_2 f <= r_2,k   a_3 rt_u <= r_3,k
    r_i,k <= R_i,k      R_d,l <= rt_d    R_u,l <= rt_u

Each iteration replaces every non-convex piece by a bound from
:mod:`flmimo.opt.surrogate` that is tight at the current state and solves the
resulting convex program.  The state is kept in SI units (bit/s, bits, s,
cycles/s); the subproblem works in the scaled units of the surrogate module.
"""

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..model import rates
from ..model.types import Allocation, Infeasible, RateReport
from ..system.config import SystemConfig, local_frequencies
from ..system.layout import ChannelState
from .cvxsolve import STATUS_FAILED, STATUS_OPTIMAL, Constraint, ConvexProgram, InfeasibleStartError, Tolerances, solve
from .expressions import Affine, Expr, VariableLayout, reciprocal
from .surrogate import (
    BIT_UNIT,
    CYCLE_UNIT,
    FREQ_UNIT,
    RATE_UNIT,
    bilinear_upper_bound,
    build_terms,
    log_lower_bound,
    log_upper_bound,
    sca_layout,
)

logger = logging.getLogger("flmimo.opt.sca")

STATUS_CONVERGED = "converged"
STATUS_MAX_ITER = "max-iter"
STATUS_INFEASIBLE = "infeasible-instance"
STATUS_STALLED = "stalled"

DEFAULT_MARGIN = 1e-3
DEFAULT_MAX_ITER = 50
DEFAULT_REL_TOL = 1e-4
VARIABLE_FLOOR = 1e-9

# SI value = scaled value * unit
_UNITS = {
    "f": FREQ_UNIT,
    "t": BIT_UNIT,
    "z": RATE_UNIT,
    "r_d": RATE_UNIT,
    "r_u": RATE_UNIT,
    "a_2": BIT_UNIT / CYCLE_UNIT,
    "r_1": RATE_UNIT,
    "r_2": RATE_UNIT,
    "r_3": RATE_UNIT,
    "rt_d": RATE_UNIT,
    "rt_u": RATE_UNIT,
}
_POWER_BLOCKS = ("eta_d", "zeta_1", "zeta_2", "eta_u", "zeta_3")
_SCALAR_AUXILIARIES = ("t", "t_q", "z", "r_d", "r_u", "a_1", "a_2", "a_3", "rt_d", "rt_u")


@dataclass(frozen=True, eq=False)
class SCAState:
    """Expansion point: an allocation plus every epigraph auxiliary, in SI units.

    ``a_1`` and ``a_3`` are dimensionless, ``a_2`` is in bit/cycle.
    """

    allocation: Allocation
    t: float
    t_q: float
    z: float
    r_d: float
    r_u: float
    a_1: float
    a_2: float
    a_3: float
    r_1: np.ndarray
    r_2: np.ndarray
    r_3: np.ndarray
    rt_d: float
    rt_u: float
    iteration: int = 0
    solver_status: str = ""


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    z: float
    min_eff_rate: float
    allocation: Allocation
    solver_status: str = ""


@dataclass(frozen=True)
class SolveReport:
    allocation: Optional[Allocation]
    z_trace: Tuple[float, ...]
    min_eff_rate: float
    iterations: int
    status: str
    wall_time_s: float
    history: Tuple[IterationRecord, ...] = ()
    rate_report: Optional[RateReport] = None
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.allocation is not None


@dataclass(frozen=True)
class EpigraphPoint:
    t: float
    t_q: float
    ratio: float


def pack_state(state: SCAState, layout: VariableLayout) -> np.ndarray:
    """Flatten ``state`` into the subproblem's scaled variable vector."""
    x = np.zeros(layout.size)
    for name in _POWER_BLOCKS:
        x[layout.slice(name)] = getattr(state.allocation, name)
    x[layout.slice("f")] = state.allocation.f / _UNITS["f"]
    for name in _SCALAR_AUXILIARIES:
        x[layout.slice(name)] = getattr(state, name) / _UNITS.get(name, 1.0)
    for name in ("r_1", "r_2", "r_3"):
        x[layout.slice(name)] = getattr(state, name) / _UNITS[name]
    return x


def unpack_state(x: np.ndarray, layout: VariableLayout, iteration: int = 0, solver_status: str = "") -> SCAState:
    """Inverse of :func:`pack_state`."""

    def block(name: str) -> np.ndarray:
        return np.array(x[layout.slice(name)], dtype=float) * _UNITS.get(name, 1.0)

    allocation = Allocation(
        eta_d=block("eta_d"),
        zeta_1=block("zeta_1"),
        zeta_2=block("zeta_2"),
        eta_u=block("eta_u"),
        zeta_3=block("zeta_3"),
        f=float(block("f")[0]),
    )
    scalars = {name: float(block(name)[0]) for name in _SCALAR_AUXILIARIES}
    return SCAState(
        allocation=allocation,
        r_1=block("r_1"),
        r_2=block("r_2"),
        r_3=block("r_3"),
        iteration=iteration,
        solver_status=solver_status,
        **scalars,
    )


def epigraph_value(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> EpigraphPoint:
    """Tight ``t`` and ``t_q`` of the epigraph form for a fixed allocation.

    ``ratio = t / t_q`` is the exact min effective rate whenever the round
    duration is finite.
    """
    report = rates.evaluate(a, ch, cfg)
    t_q = report.round_time
    t = float(np.min(report.d_1 + report.d_2 + report.d_3))
    ratio = t / t_q if math.isfinite(t_q) and t_q > 0 else 0.0
    return EpigraphPoint(t=t, t_q=t_q, ratio=ratio)


def _equal_power_allocation(cfg: SystemConfig, margin: float, f: Optional[float] = None) -> Allocation:
    keep = 1.0 - margin
    users = cfg.L + cfg.K
    if f is None:
        f = cfg.f_max - margin * (cfg.f_max - cfg.f_min)
    return Allocation(
        eta_d=np.full(cfg.L, keep / users),
        zeta_1=np.full(cfg.K, keep / users),
        zeta_2=np.full(cfg.K, keep / cfg.K),
        eta_u=np.full(cfg.L, keep),
        zeta_3=np.full(cfg.K, keep / cfg.K),
        f=f,
    )


def _start_frequency(transmit_time: float, cfg: SystemConfig, margin: float) -> float:
    """Baseline frequency that leaves a ``margin`` share of the deadline slack unused.

    Falls back to just below ``f_max`` when that frequency is out of range.
    """
    ceiling = cfg.f_max - margin * (cfg.f_max - cfg.f_min)
    budget = (1.0 - margin) * (cfg.t_qos - transmit_time)
    if not budget > 0.0:
        return ceiling
    f = cfg.compute_cycles / budget
    if f > ceiling or float(local_frequencies(f, cfg).min()) <= cfg.f_min * (1.0 + margin):
        return ceiling
    return f


def _initial_state(ch: ChannelState, cfg: SystemConfig, margin: float) -> Optional[SCAState]:
    exact = rates.phase_rates(_equal_power_allocation(cfg, margin), ch, cfg)
    keep = 1.0 - margin
    r_d = keep * float(exact.r_d_fl.min())
    r_u = keep * float(exact.r_u_fl.min())
    rt_d = (1.0 + margin) * float(exact.r_d_fl.max())
    rt_u = (1.0 + margin) * float(exact.r_u_fl.max())
    r_1 = keep * exact.r_1
    r_2 = keep * exact.r_2
    r_3 = keep * exact.r_3
    if min(r_d, r_u, r_1.min(), r_2.min(), r_3.min()) <= 0.0:
        return None

    transmit_time = cfg.S_d / r_d + cfg.S_u / r_u
    allocation = _equal_power_allocation(cfg, margin, _start_frequency(transmit_time, cfg, margin))
    f = allocation.f
    cycles = cfg.compute_cycles
    a_1 = keep * float(r_1.min()) / rt_d
    a_2 = keep * float(r_2.min()) / f
    a_3 = keep * float(r_3.min()) / rt_u
    round_time = transmit_time + cycles / f
    if round_time >= cfg.t_qos:
        return None
    t_q = round_time + margin * (cfg.t_qos - round_time)
    t = keep * (a_1 * cfg.S_d + a_2 * cycles + a_3 * cfg.S_u)
    return SCAState(
        allocation=allocation,
        t=t,
        t_q=t_q,
        z=keep * t / t_q,
        r_d=r_d,
        r_u=r_u,
        a_1=a_1,
        a_2=a_2,
        a_3=a_3,
        r_1=r_1,
        r_2=r_2,
        r_3=r_3,
        rt_d=rt_d,
        rt_u=rt_u,
    )


def initialize(ch: ChannelState, cfg: SystemConfig, margin: float = DEFAULT_MARGIN) -> Union[SCAState, Infeasible]:
    """Strictly feasible start next to the baseline: equal powers per group and
    the frequency that fills all but a ``margin`` share of the deadline slack.

    Equal power at ``f_max`` is only the feasibility check.  The round time
    falls as ``f`` grows, so once ``f_max`` meets the deadline every frequency
    between the deadline-filling one and ``f_max`` does too; the start takes
    the lower end of that range, leaving the QoS constraint slack by the
    ``margin`` share.

    Every auxiliary sits a factor ``margin`` inside its tight value.  The
    instance is infeasible when even equal power at ``f_max`` misses the QoS
    deadline.
    """
    fastest = _equal_power_allocation(cfg, 0.0)
    exact_round = sum(rates.phase_times(fastest, ch, cfg))
    if not exact_round < cfg.t_qos:
        return Infeasible(
            f"round time {exact_round:.6g} s at equal power and f_max exceeds t_qos {cfg.t_qos:g} s"
        )
    for attempt in range(4):
        state = _initial_state(ch, cfg, margin / 10 ** attempt)
        if state is not None:
            return state
    return Infeasible("no strictly feasible start inside the QoS deadline")


def _balanced_product(u: Affine, v: Affine, u_n: float, v_n: float) -> Expr:
    # Rescale u*v = (c u)(v / c) so both factors are equal at the expansion point.
    c = math.sqrt(v_n / u_n)
    return bilinear_upper_bound(u * c, v * (1.0 / c), u_n * c, v_n / c)


def build_subproblem(state: SCAState, ch: ChannelState, cfg: SystemConfig) -> ConvexProgram:
    """Convex program whose feasible set lies inside the original one and touches it at ``state``."""
    L, K = cfg.L, cfg.K
    layout = sca_layout(L, K)
    var = layout.variable
    point = pack_state(state, layout)
    terms = build_terms(state.allocation, ch, cfg, layout)

    s_d = cfg.S_d / BIT_UNIT
    s_u = cfg.S_u / BIT_UNIT
    cycles = cfg.compute_cycles / CYCLE_UNIT
    f_floor = max(cfg.f_min / FREQ_UNIT, VARIABLE_FLOOR)

    def at(name: str, i: int = 0) -> float:
        return float(point[layout.index(name, i)])

    constraints: List[Constraint] = []

    def add(tag: str, expr) -> None:
        constraints.append(Constraint(tag, expr if isinstance(expr, Expr) else Expr(expr)))

    labels = iter(layout.names())
    for name, count in layout.blocks:
        for i in range(count):
            label = next(labels)
            if name not in ("f", "r_d", "r_u"):
                add(f"nonneg:{label}", -var(name, i))
    add("floor:r_d", VARIABLE_FLOOR - var("r_d"))
    add("floor:r_u", VARIABLE_FLOOR - var("r_u"))

    add("power_s1", layout.block_sum("eta_d") + layout.block_sum("zeta_1") - 1.0)
    add("power_s2", layout.block_sum("zeta_2") - 1.0)
    for l in range(L):
        add(f"power_uplink[{l}]", var("eta_u", l) - 1.0)
    add("power_s3", layout.block_sum("zeta_3") - 1.0)

    add("freq_max", var("f") - cfg.f_max / FREQ_UNIT)
    add("freq_min", f_floor - var("f"))
    weights = local_frequencies(1.0, cfg)
    for l in np.flatnonzero(weights < 1.0):
        add(f"local_freq_min[{l}]", f_floor - var("f") * float(weights[l]))
    add("qos_deadline", var("t_q") - cfg.t_qos)

    add("epigraph_product", _balanced_product(var("z"), var("t_q"), at("z"), at("t_q")) - var("t"))
    add("data_volume", var("t") - (var("a_1") * s_d + var("a_2") * cycles + var("a_3") * s_u))
    add(
        "round_time",
        reciprocal(s_d, var("r_d")) + reciprocal(cycles, var("f")) + reciprocal(s_u, var("r_u")) - var("t_q"),
    )

    for l, term in enumerate(terms.fl_downlink):
        add(f"fl_downlink_floor[{l}]", var("r_d") - log_lower_bound(term))
    for l, term in enumerate(terms.fl_uplink):
        add(f"fl_uplink_floor[{l}]", var("r_u") - log_lower_bound(term))

    for k in range(K):
        add(f"ratio_s1[{k}]", _balanced_product(var("a_1"), var("rt_d"), at("a_1"), at("rt_d")) - var("r_1", k))
        add(f"ratio_s2[{k}]", _balanced_product(var("a_2"), var("f"), at("a_2"), at("f")) - var("r_2", k))
        add(f"ratio_s3[{k}]", _balanced_product(var("a_3"), var("rt_u"), at("a_3"), at("rt_u")) - var("r_3", k))

    for block, group in (("r_1", terms.nfl_s1), ("r_2", terms.nfl_s2), ("r_3", terms.nfl_s3)):
        phase = block[-1]
        for k, term in enumerate(group):
            add(f"nfl_rate_s{phase}[{k}]", var(block, k) - log_lower_bound(term))

    for l, term in enumerate(terms.fl_downlink):
        add(f"fl_downlink_cap[{l}]", log_upper_bound(term) - var("rt_d"))
    for l, term in enumerate(terms.fl_uplink):
        add(f"fl_uplink_cap[{l}]", log_upper_bound(term) - var("rt_u"))

    return ConvexProgram(layout=layout, objective=var("z"), constraints=tuple(constraints))


def iterate(
    state: SCAState,
    ch: ChannelState,
    cfg: SystemConfig,
    tol: Optional[Tolerances] = None,
) -> SCAState:
    """Solve the subproblem expanded at ``state`` and return its optimizer.

    If the solver rejects the start the previous state comes back with
    ``solver_status`` set to ``"infeasible-start"``.
    """
    program = build_subproblem(state, ch, cfg)
    start = pack_state(state, program.layout)
    try:
        solution = solve(program, start, tol)
    except InfeasibleStartError as exc:
        logger.warning("iteration %d: %s", state.iteration + 1, exc)
        return replace(state, solver_status="infeasible-start")
    logger.debug(
        "iteration %d: z=%.9g bit/s solver=%s outer=%d newton=%d",
        state.iteration + 1,
        solution.objective * RATE_UNIT,
        solution.status,
        solution.outer_iterations,
        solution.newton_iterations,
    )
    return unpack_state(solution.x, program.layout, state.iteration + 1, solution.status)


def _record(state: SCAState, ch: ChannelState, cfg: SystemConfig) -> IterationRecord:
    exact = rates.evaluate(state.allocation, ch, cfg).min_eff_rate
    return IterationRecord(state.iteration, state.z, exact, state.allocation, state.solver_status)


def run(
    ch: ChannelState,
    cfg: SystemConfig,
    max_iter: int = DEFAULT_MAX_ITER,
    rel_tol: float = DEFAULT_REL_TOL,
    tol: Optional[Tolerances] = None,
) -> SolveReport:
    """Iterate from :func:`initialize` until the relative change in ``z`` drops below ``rel_tol``."""
    started = time.perf_counter()
    state = initialize(ch, cfg)
    if isinstance(state, Infeasible):
        logger.info("infeasible instance: %s", state.reason)
        return SolveReport(
            allocation=None,
            z_trace=(),
            min_eff_rate=0.0,
            iterations=0,
            status=STATUS_INFEASIBLE,
            wall_time_s=time.perf_counter() - started,
            reason=state.reason,
        )

    history = [_record(state, ch, cfg)]
    status = STATUS_MAX_ITER
    for _ in range(max_iter):
        candidate = iterate(state, ch, cfg, tol)
        if candidate.solver_status == "infeasible-start":
            status = STATUS_STALLED
            break
        history.append(_record(candidate, ch, cfg))
        change = abs(candidate.z - state.z) / max(abs(state.z), VARIABLE_FLOOR)
        state = candidate
        if change <= rel_tol:
            # A failed subproblem that stops moving has not converged.
            status = STATUS_STALLED if candidate.solver_status == STATUS_FAILED else STATUS_CONVERGED
            break
        if candidate.solver_status != STATUS_OPTIMAL:
            logger.debug("iteration %d: subproblem ended with %s", candidate.iteration, candidate.solver_status)

    report = rates.evaluate(state.allocation, ch, cfg)
    logger.info(
        "sca %s after %d iterations: z=%.6g bit/s, min effective rate=%.6g bit/s",
        status, state.iteration, state.z, report.min_eff_rate,
    )
    return SolveReport(
        allocation=state.allocation,
        z_trace=tuple(record.z for record in history),
        min_eff_rate=report.min_eff_rate,
        iterations=state.iteration,
        status=status,
        wall_time_s=time.perf_counter() - started,
        history=tuple(history),
        rate_report=report,
    )


def trace_rows(report: SolveReport) -> List[Dict[str, object]]:
    """Per-iteration rows: surrogate objective ``z`` and the exact objective, both bit/s."""
    return [
        {
            "iteration": record.iteration,
            "z": record.z,
            "min_eff_rate": record.min_eff_rate,
            "solver_status": record.solver_status,
        }
        for record in report.history
    ]
