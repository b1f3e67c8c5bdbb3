"""Random UE placement, large-scale fading and MMSE channel-estimate variances."""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .config import SystemConfig

ArrayLike = Union[float, np.ndarray]

PATHLOSS_INTERCEPT_DB = -148.1
PATHLOSS_SLOPE_DB = 37.6
DEFAULT_D_MIN = 35.0


@dataclass(frozen=True)
class ChannelState:
    """Large-scale fading of every UE plus the estimate variance seen in each phase.

    FL quantities are indexed by ``l`` (length L), non-FL ones by ``k`` (length K).
    Arrays are read-only.
    """

    beta_fl: np.ndarray
    beta_nfl: np.ndarray
    sigma2_d: np.ndarray
    sigma2_u: np.ndarray
    sigma2_1: np.ndarray
    sigma2_2: np.ndarray
    sigma2_3: np.ndarray
    positions: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("beta_fl", "beta_nfl", "sigma2_d", "sigma2_u", "sigma2_1", "sigma2_2", "sigma2_3", "positions"):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def num_fl(self) -> int:
        return int(self.beta_fl.shape[0])

    @property
    def num_nfl(self) -> int:
        return int(self.beta_nfl.shape[0])

    def distances(self) -> np.ndarray:
        """BS-UE distances in metres, FL UEs first."""
        if self.positions.size == 0:
            return np.zeros(0)
        return np.hypot(self.positions[:, 0], self.positions[:, 1])


def pathloss_beta(d: ArrayLike, z: ArrayLike = 0.0, d_min: float = DEFAULT_D_MIN) -> ArrayLike:
    """Linear large-scale gain at distance ``d`` metres with ``z`` dB of shadowing."""
    dist = np.asarray(d, dtype=float)
    if np.any(dist < d_min):
        raise ValueError(f"distance must be at least d_min ({d_min:g} m).")
    gain_db = PATHLOSS_INTERCEPT_DB - PATHLOSS_SLOPE_DB * np.log10(dist / 1000.0) + np.asarray(z, dtype=float)
    beta = 10.0 ** (gain_db / 10.0)
    if np.ndim(beta) == 0:
        return float(beta)
    return beta


def mmse_variance(rho_p: float, tau: float, beta: ArrayLike) -> ArrayLike:
    """Power of the MMSE channel estimate from ``tau`` pilot symbols at normalized power ``rho_p``."""
    if rho_p < 0:
        raise ValueError("rho_p must be non-negative.")
    if tau < 1:
        raise ValueError("tau must be at least one pilot symbol.")
    gains = np.asarray(beta, dtype=float)
    if np.any(gains < 0):
        raise ValueError("beta must be non-negative.")
    snr = rho_p * tau * gains
    variance = snr * gains / (snr + 1.0)
    if np.ndim(variance) == 0:
        return float(variance)
    return variance


def channel_from_betas(
    beta_fl: np.ndarray,
    beta_nfl: np.ndarray,
    cfg: SystemConfig,
    positions: Optional[np.ndarray] = None,
    seed: Optional[int] = None,
) -> ChannelState:
    """Build a :class:`ChannelState` from given gains, deriving all five estimate variances."""
    beta_fl = np.asarray(beta_fl, dtype=float).reshape(-1)
    beta_nfl = np.asarray(beta_nfl, dtype=float).reshape(-1)
    if np.any(beta_fl <= 0) or np.any(beta_nfl <= 0):
        raise ValueError("beta values must be positive.")
    if positions is None:
        positions = np.zeros((0, 2))
    rho_p = cfg.rho_p
    return ChannelState(
        beta_fl=beta_fl,
        beta_nfl=beta_nfl,
        sigma2_d=mmse_variance(rho_p, cfg.tau_dp, beta_fl),
        sigma2_u=mmse_variance(rho_p, cfg.tau_up, beta_fl),
        sigma2_1=mmse_variance(rho_p, cfg.tau_1p, beta_nfl),
        sigma2_2=mmse_variance(rho_p, cfg.tau_2p, beta_nfl),
        sigma2_3=mmse_variance(rho_p, cfg.tau_3p, beta_nfl),
        positions=positions,
        seed=seed,
    )


def sample_positions(rng: np.random.Generator, count: int, side: float, d_min: float) -> np.ndarray:
    """Draw ``count`` points uniformly in the square centred on the BS, outside radius ``d_min``."""
    half = side / 2.0
    accepted = np.zeros((0, 2))
    while accepted.shape[0] < count:
        need = count - accepted.shape[0]
        batch = rng.uniform(-half, half, size=(2 * need + 8, 2))
        keep = batch[np.hypot(batch[:, 0], batch[:, 1]) >= d_min]
        accepted = np.vstack([accepted, keep[:need]])
    return accepted


def sample_layout(cfg: SystemConfig, seed: int) -> ChannelState:
    """Drop L FL UEs then K non-FL UEs at random and shadow each link independently."""
    rng = np.random.default_rng(seed)
    count = cfg.L + cfg.K
    positions = sample_positions(rng, count, cfg.D_side, cfg.d_min)
    shadowing = rng.normal(0.0, cfg.shadow_sigma_db, size=count)
    distances = np.hypot(positions[:, 0], positions[:, 1])
    betas = np.asarray(pathloss_beta(distances, shadowing, d_min=cfg.d_min), dtype=float).reshape(-1)
    return channel_from_betas(betas[: cfg.L], betas[cfg.L:], cfg, positions=positions, seed=seed)
