"""Closed-form achievable rates, phase delays and the min effective-rate objective.

One FL round has three phases:

* S1: the BS broadcasts the global model to the L FL UEs while also serving
  the K non-FL UEs (zero-forcing over all L+K users, full band).
* S2: FL UEs train locally; the BS serves only the non-FL UEs.
* S3: FL UEs upload on one half of the band while the BS serves the non-FL
  UEs on the other half.

A non-FL UE's effective rate is the data it received over all three phases
divided by the whole round duration.
"""

import math
from fractions import Fraction
from typing import Dict, List, NamedTuple, Tuple, Union

import numpy as np

from ..system.config import SystemConfig, local_frequencies
from ..system.layout import ChannelState
from .types import Allocation, FeasibilityViolation, RateReport, SinrParts

LN2 = math.log(2.0)


class PhaseRates(NamedTuple):
    r_d_fl: np.ndarray
    r_1: np.ndarray
    r_2: np.ndarray
    r_u_fl: np.ndarray
    r_3: np.ndarray


def _check_shapes(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> None:
    expected = {
        "eta_d": cfg.L,
        "zeta_1": cfg.K,
        "zeta_2": cfg.K,
        "eta_u": cfg.L,
        "zeta_3": cfg.K,
    }
    for name, size in expected.items():
        if getattr(a, name).shape != (size,):
            raise ValueError(f"{name} must have length {size}.")
    if ch.num_fl != cfg.L or ch.num_nfl != cfg.K:
        raise ValueError("channel does not match the configured L and K.")


def _check_index(index: int, size: int, name: str) -> None:
    if not 0 <= index < size:
        raise IndexError(f"{name} index {index} out of range for {size} UEs.")


def s1_fl_parts(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    load = a.eta_d.sum() + a.zeta_1.sum()
    numerator = cfg.rho_d * a.eta_d * (cfg.M - cfg.L - cfg.K) * ch.sigma2_d
    denominator = 1.0 + cfg.rho_d * (ch.beta_fl - ch.sigma2_d) * load
    return numerator, denominator


def s1_nfl_parts(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    load = a.eta_d.sum() + a.zeta_1.sum()
    numerator = cfg.rho_d * a.zeta_1 * (cfg.M - cfg.L - cfg.K) * ch.sigma2_1
    denominator = 1.0 + cfg.rho_d * (ch.beta_nfl - ch.sigma2_1) * load
    return numerator, denominator


def s2_parts(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    numerator = cfg.rho_d * a.zeta_2 * (cfg.M - cfg.K) * ch.sigma2_2
    denominator = 1.0 + cfg.rho_d * (ch.beta_nfl - ch.sigma2_2) * a.zeta_2.sum()
    return numerator, denominator


def s3_ul_parts(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    interference = float(np.dot(ch.beta_fl - ch.sigma2_u, a.eta_u))
    numerator = cfg.rho_u * a.eta_u * (cfg.M - cfg.L) * ch.sigma2_u
    denominator = np.full(cfg.L, 1.0 + cfg.rho_u * interference)
    return numerator, denominator


def s3_dl_parts(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> Tuple[np.ndarray, np.ndarray]:
    numerator = cfg.rho_d * a.zeta_3 * (cfg.M - cfg.K) * ch.sigma2_3
    denominator = 1.0 + cfg.rho_d * (ch.beta_nfl - ch.sigma2_3) * a.zeta_3.sum()
    return numerator, denominator


def _parts(builder, a, ch, cfg, index, size, name) -> SinrParts:
    _check_shapes(a, ch, cfg)
    _check_index(index, size, name)
    numerator, denominator = builder(a, ch, cfg)
    return SinrParts(float(numerator[index]), float(denominator[index]))


def sinr_s1_fl(a: Allocation, ch: ChannelState, cfg: SystemConfig, l: int) -> SinrParts:
    """SINR of FL UE ``l`` receiving the global model in S1."""
    return _parts(s1_fl_parts, a, ch, cfg, l, cfg.L, "FL UE")


def sinr_s1_nfl(a: Allocation, ch: ChannelState, cfg: SystemConfig, k: int) -> SinrParts:
    """SINR of non-FL UE ``k`` in S1."""
    return _parts(s1_nfl_parts, a, ch, cfg, k, cfg.K, "non-FL UE")


def sinr_s2(a: Allocation, ch: ChannelState, cfg: SystemConfig, k: int) -> SinrParts:
    return _parts(s2_parts, a, ch, cfg, k, cfg.K, "non-FL UE")


def sinr_s3_ul(a: Allocation, ch: ChannelState, cfg: SystemConfig, l: int) -> SinrParts:
    """Uplink SINR of FL UE ``l`` sending its local update in S3."""
    return _parts(s3_ul_parts, a, ch, cfg, l, cfg.L, "FL UE")


def sinr_s3_dl(a: Allocation, ch: ChannelState, cfg: SystemConfig, k: int) -> SinrParts:
    return _parts(s3_dl_parts, a, ch, cfg, k, cfg.K, "non-FL UE")


def prelog(cfg: SystemConfig, tau_pilot: int, half_band: bool = False) -> float:
    """Bandwidth times the fraction of the coherence interval left after pilots (Hz)."""
    fraction = Fraction(cfg.tau_c - tau_pilot, cfg.tau_c)
    band = cfg.B / 2.0 if half_band else cfg.B
    return float(fraction) * band


def rate_from_sinr(
    gamma: Union[float, np.ndarray],
    tau_pilot: int,
    cfg: SystemConfig,
    half_band: bool = False,
) -> Union[float, np.ndarray]:
    """Achievable rate in bit/s for SINR ``gamma``."""
    values = np.asarray(gamma, dtype=float)
    if np.any(values < 0):
        raise ValueError("gamma must be non-negative.")
    rate = prelog(cfg, tau_pilot, half_band) * np.log1p(values) / LN2
    if np.ndim(rate) == 0:
        return float(rate)
    return rate


def phase_rates(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> PhaseRates:
    """Per-UE rates of every phase, in bit/s."""
    _check_shapes(a, ch, cfg)

    def rate(parts, tau, half_band=False):
        numerator, denominator = parts
        return rate_from_sinr(numerator / denominator, tau, cfg, half_band)

    return PhaseRates(
        r_d_fl=rate(s1_fl_parts(a, ch, cfg), cfg.tau_dp),
        r_1=rate(s1_nfl_parts(a, ch, cfg), cfg.tau_1p),
        r_2=rate(s2_parts(a, ch, cfg), cfg.tau_2p),
        r_u_fl=rate(s3_ul_parts(a, ch, cfg), cfg.tau_up, half_band=True),
        r_3=rate(s3_dl_parts(a, ch, cfg), cfg.tau_3p, half_band=True),
    )


def _delay(size: float, rate: float) -> float:
    return size / rate if rate > 0 else math.inf


def _group_min(rates: np.ndarray) -> float:
    return float(rates.min()) if rates.size else 0.0


def _times(rates: PhaseRates, f: float, cfg: SystemConfig) -> Tuple[float, float, float]:
    r_d = _group_min(rates.r_d_fl)
    r_u = _group_min(rates.r_u_fl)
    return _delay(cfg.S_d, r_d), _delay(cfg.compute_cycles, f), _delay(cfg.S_u, r_u)


def phase_times(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> Tuple[float, float, float]:
    """Broadcast, computation and upload delays in seconds; ``inf`` when a group rate is zero."""
    return _times(phase_rates(a, ch, cfg), a.f, cfg)


def evaluate(a: Allocation, ch: ChannelState, cfg: SystemConfig) -> RateReport:
    """Evaluate every rate, delay and data volume of ``a`` and the min effective rate."""
    rates = phase_rates(a, ch, cfg)
    t_d, t_c, t_u = _times(rates, a.f, cfg)

    def volume(rate, duration):
        with np.errstate(invalid="ignore"):
            return np.where(rate > 0, rate * duration, 0.0)

    d_1 = volume(rates.r_1, t_d)
    d_2 = volume(rates.r_2, t_c)
    d_3 = volume(rates.r_3, t_u)
    round_time = t_d + t_c + t_u
    if math.isfinite(round_time):
        eff_rate = (d_1 + d_2 + d_3) / round_time
    else:
        eff_rate = np.zeros(cfg.K)

    return RateReport(
        r_d_fl=rates.r_d_fl,
        r_d_group=_group_min(rates.r_d_fl),
        r_1=rates.r_1,
        r_2=rates.r_2,
        r_u_fl=rates.r_u_fl,
        r_u_group=_group_min(rates.r_u_fl),
        r_3=rates.r_3,
        t_d=t_d,
        t_c=t_c,
        t_u=t_u,
        d_1=d_1,
        d_2=d_2,
        d_3=d_3,
        eff_rate=eff_rate,
        min_eff_rate=float(eff_rate.min()) if eff_rate.size else 0.0,
    )


def check_feasibility(
    a: Allocation,
    ch: ChannelState,
    cfg: SystemConfig,
    tol: float = 1e-9,
) -> List[FeasibilityViolation]:
    """List every constraint ``a`` violates; empty means the allocation is feasible.

    Upper bounds are checked with a relative tolerance ``tol`` so that
    allocations sitting exactly on a bound (the baseline meets the deadline
    with equality) are accepted.
    """
    _check_shapes(a, ch, cfg)
    violations: List[FeasibilityViolation] = []

    def flag(name: str, residual: float, slack: float) -> None:
        if residual > slack:
            violations.append(FeasibilityViolation(name, float(residual)))

    for name in ("eta_d", "zeta_1", "zeta_2", "eta_u", "zeta_3"):
        for index, value in enumerate(getattr(a, name)):
            flag(f"nonneg:{name}[{index}]", -value, 0.0)

    flag("power_s1", a.eta_d.sum() + a.zeta_1.sum() - 1.0, tol)
    flag("power_s2", a.zeta_2.sum() - 1.0, tol)
    for index, value in enumerate(a.eta_u):
        flag(f"power_uplink[{index}]", value - 1.0, tol)
    flag("power_s3", a.zeta_3.sum() - 1.0, tol)

    if a.f <= cfg.f_min:
        violations.append(FeasibilityViolation("freq_min", cfg.f_min - a.f))
    flag("freq_max", a.f - cfg.f_max, tol * cfg.f_max)
    for index, f_local in enumerate(local_frequencies(a.f, cfg)):
        if f_local <= cfg.f_min:
            violations.append(FeasibilityViolation(f"local_freq_min[{index}]", cfg.f_min - f_local))
        flag(f"local_freq_max[{index}]", f_local - cfg.f_max, tol * cfg.f_max)

    if any(v.constraint.startswith("nonneg:") for v in violations):
        # rates are undefined for negative powers
        return violations
    round_time = sum(phase_times(a, ch, cfg))
    flag("qos_deadline", round_time - cfg.t_qos, tol * cfg.t_qos)
    return violations


def report_columns(L: int, K: int) -> List[str]:
    """CSV column order of :func:`report_row` (rates bit/s, delays s, volumes bits)."""
    columns = [f"r_d_fl_{l}" for l in range(L)] + ["r_d_group"]
    columns += [f"r_1_{k}" for k in range(K)]
    columns += [f"r_2_{k}" for k in range(K)]
    columns += [f"r_u_fl_{l}" for l in range(L)] + ["r_u_group"]
    columns += [f"r_3_{k}" for k in range(K)]
    columns += ["t_d", "t_c", "t_u"]
    for name in ("d_1", "d_2", "d_3", "eff_rate"):
        columns += [f"{name}_{k}" for k in range(K)]
    columns.append("min_eff_rate")
    return columns


def report_row(report: RateReport) -> Dict[str, float]:
    """Flatten ``report`` into one CSV row keyed by :func:`report_columns`."""
    row: Dict[str, float] = {}
    for name in ("r_d_fl", "r_1", "r_2", "r_u_fl", "r_3", "d_1", "d_2", "d_3", "eff_rate"):
        for index, value in enumerate(getattr(report, name)):
            row[f"{name}_{index}"] = float(value)
    for name in ("r_d_group", "r_u_group", "t_d", "t_c", "t_u", "min_eff_rate"):
        row[name] = float(getattr(report, name))
    return row
