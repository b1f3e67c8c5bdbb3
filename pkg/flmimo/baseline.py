"""Equal-power baseline with the computing frequency chosen to just meet the deadline."""

import numpy as np

from .model import rates
from .model.types import Allocation, Infeasible, MaybeAllocation
from .system.config import SystemConfig
from .system.layout import ChannelState


def bl_allocation(ch: ChannelState, cfg: SystemConfig) -> MaybeAllocation:
    """Split each phase's power budget evenly and give local computation all remaining time.

    The frequency is never clamped: if meeting ``t_qos`` would need more than
    ``f_max`` the baseline is reported infeasible.
    """
    users = cfg.L + cfg.K
    powers = dict(
        eta_d=np.full(cfg.L, 1.0 / users),
        zeta_1=np.full(cfg.K, 1.0 / users),
        zeta_2=np.full(cfg.K, 1.0 / cfg.K),
        eta_u=np.ones(cfg.L),
        zeta_3=np.full(cfg.K, 1.0 / cfg.K),
    )
    t_d, _, t_u = rates.phase_times(Allocation(f=cfg.f_max, **powers), ch, cfg)
    budget = cfg.t_qos - t_d - t_u
    if not budget > 0.0:
        return Infeasible(f"transmissions alone take {t_d + t_u:.6g} s of the {cfg.t_qos:g} s deadline")

    f = cfg.compute_cycles / budget
    if f > cfg.f_max:
        return Infeasible(f"deadline needs f = {f:.6g} cycles/s above f_max = {cfg.f_max:.6g}")
    if f <= cfg.f_min:
        return Infeasible(f"deadline gives f = {f:.6g} cycles/s, not above f_min = {cfg.f_min:.6g}")
    return Allocation(f=f, **powers)
