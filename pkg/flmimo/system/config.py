"""Scenario configuration: constants, normalization helpers and the config-file loader."""

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / "configs" / "default.cfg"


class ConfigError(ValueError):
    """Raised by :func:`load_config` with every problem found in a config file."""

    def __init__(self, errors: List[str], source: Optional[str] = None):
        self.errors = list(errors)
        self.source = source
        where = f"{source}: " if source else ""
        super().__init__(where + "; ".join(self.errors))


@dataclass(frozen=True)
class SystemConfig:
    """Scenario constants shared by the rate model, the optimizer and the harness.

    Raw powers are in watts; the solver works with the normalized powers
    exposed as ``rho_d``, ``rho_u`` and ``rho_p``.
    """

    M: int = 100
    L: int = 5
    K: int = 5
    B: float = 20e6
    tau_c: int = 200
    tau_dp: int = 20
    tau_1p: int = 20
    tau_2p: int = 20
    tau_up: int = 20
    tau_3p: int = 20
    noise_dbm: float = -92.0
    p_d_watt: float = 10.0
    p_u_watt: float = 0.2
    p_p_watt: float = 0.2
    S_d: float = 16e6
    S_u: float = 16e6
    N_c: int = 20
    D_bar: float = 1.6e5
    c_bar: float = 20.0
    D_local: Tuple[float, ...] = ()
    c_local: Tuple[float, ...] = ()
    f_min: float = 0.0
    f_max: float = 5e9
    t_qos: float = 3.0
    D_side: float = 250.0
    d_min: float = 35.0
    shadow_sigma_db: float = 7.0

    @property
    def noise_watt(self) -> float:
        return 10.0 ** ((self.noise_dbm - 30.0) / 10.0)

    @property
    def rho_d(self) -> float:
        return self.p_d_watt / self.noise_watt

    @property
    def rho_u(self) -> float:
        return self.p_u_watt / self.noise_watt

    @property
    def rho_p(self) -> float:
        return self.p_p_watt / self.noise_watt

    @property
    def compute_cycles(self) -> float:
        """Cycles one FL UE spends on local training per round (N_c * D_bar * c_bar)."""
        return self.N_c * self.D_bar * self.c_bar

    def local_datasets(self) -> np.ndarray:
        if self.D_local:
            return np.asarray(self.D_local, dtype=float)
        return np.full(self.L, float(self.D_bar))

    def local_cycles(self) -> np.ndarray:
        if self.c_local:
            return np.asarray(self.c_local, dtype=float)
        return np.full(self.L, float(self.c_bar))


def local_frequencies(f: float, cfg: SystemConfig) -> np.ndarray:
    """Per-UE computing frequency that lets every FL UE finish with the slowest one."""
    weights = cfg.local_datasets() * cfg.local_cycles() / (cfg.D_bar * cfg.c_bar)
    return weights * float(f)


def normalize_positive_int(value: object, name: str) -> int:
    """Convert a value to a strictly positive integer with field-specific error text."""
    v = normalize_non_negative_int(value, name)
    if v == 0:
        raise ValueError(f"{name} must be positive.")
    return v


def normalize_non_negative_int(value: object, name: str) -> int:
    """Convert a value to a non-negative integer with field-specific error text."""
    if isinstance(value, bool):
        raise ValueError(f"{name} must be an integer.")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{name} must be an integer.")
    if isinstance(value, str):
        value = value.strip()
    try:
        v = int(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be an integer.") from exc
    if v < 0:
        raise ValueError(f"{name} must be non-negative.")
    return v


def normalize_float(value: object, name: str) -> float:
    """Convert a value to a finite float."""
    if isinstance(value, bool):
        raise ValueError(f"{name} must be a number.")
    if isinstance(value, str):
        value = value.strip()
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be a number.") from exc
    if not np.isfinite(v):
        raise ValueError(f"{name} must be finite.")
    return v


def normalize_positive_float(value: object, name: str) -> float:
    v = normalize_float(value, name)
    if v <= 0:
        raise ValueError(f"{name} must be positive.")
    return v


def normalize_non_negative_float(value: object, name: str) -> float:
    v = normalize_float(value, name)
    if v < 0:
        raise ValueError(f"{name} must be non-negative.")
    return v


def normalize_float_list(value: object, name: str) -> Tuple[float, ...]:
    """Parse a comma-separated list (or a sequence) of positive floats; empty means unset."""
    if value is None:
        return ()
    if isinstance(value, str):
        parts = [part.strip() for part in value.split(",") if part.strip()]
    else:
        try:
            parts = list(value)
        except TypeError as exc:
            raise ValueError(f"{name} must be a comma-separated list of numbers.") from exc
    return tuple(normalize_positive_float(part, name) for part in parts)


_FIELD_NORMALIZERS: Dict[str, Callable[[object, str], object]] = {
    "M": normalize_positive_int,
    "L": normalize_non_negative_int,
    "K": normalize_non_negative_int,
    "B": normalize_positive_float,
    "tau_c": normalize_positive_int,
    "tau_dp": normalize_positive_int,
    "tau_1p": normalize_positive_int,
    "tau_2p": normalize_positive_int,
    "tau_up": normalize_positive_int,
    "tau_3p": normalize_positive_int,
    "noise_dbm": normalize_float,
    "p_d_watt": normalize_positive_float,
    "p_u_watt": normalize_positive_float,
    "p_p_watt": normalize_positive_float,
    "S_d": normalize_positive_float,
    "S_u": normalize_positive_float,
    "N_c": normalize_positive_int,
    "D_bar": normalize_positive_float,
    "c_bar": normalize_positive_float,
    "D_local": normalize_float_list,
    "c_local": normalize_float_list,
    "f_min": normalize_non_negative_float,
    "f_max": normalize_positive_float,
    "t_qos": normalize_positive_float,
    "D_side": normalize_positive_float,
    "d_min": normalize_positive_float,
    "shadow_sigma_db": normalize_non_negative_float,
}

CONFIG_KEYS = tuple(field.name for field in fields(SystemConfig))


def merge_config(current: SystemConfig, payload: Optional[Mapping[str, object]]) -> SystemConfig:
    """Merge a partial config payload into an existing immutable system config."""
    if payload is None:
        return current

    updates = {}
    for key, raw in payload.items():
        normalizer = _FIELD_NORMALIZERS.get(key)
        if normalizer is None:
            raise ValueError(f"Unknown config key '{key}'.")
        updates[key] = normalizer(raw, key)
    return replace(current, **updates)


def with_overrides(cfg: SystemConfig, **overrides: object) -> SystemConfig:
    """Return ``cfg`` with a few fields replaced, e.g. ``with_overrides(cfg, M=40)``."""
    return merge_config(cfg, overrides)


def validate_config(cfg: SystemConfig) -> List[str]:
    """Return every invariant violation of ``cfg``; each message starts with the offending key."""
    errors: List[str] = []
    users = cfg.L + cfg.K

    if cfg.L < 1:
        errors.append("L must be at least 1.")
    if cfg.K < 1:
        errors.append("K must be at least 1.")
    if cfg.M < users:
        errors.append(f"M must be at least L + K ({users}).")

    pilot_floors = {
        "tau_dp": users,
        "tau_1p": users,
        "tau_2p": cfg.K,
        "tau_up": users,
        "tau_3p": users,
    }
    for key, floor in pilot_floors.items():
        tau = getattr(cfg, key)
        if tau < floor:
            errors.append(f"{key} must be at least {floor}.")
        if tau >= cfg.tau_c:
            errors.append(f"{key} must be smaller than tau_c ({cfg.tau_c}).")

    if cfg.f_min >= cfg.f_max:
        errors.append("f_min must be smaller than f_max.")
    if cfg.d_min * 2 >= cfg.D_side:
        errors.append("d_min must be smaller than D_side / 2.")

    for key, cap_key in (("D_local", "D_bar"), ("c_local", "c_bar")):
        values = getattr(cfg, key)
        if not values:
            continue
        if len(values) != cfg.L:
            errors.append(f"{key} must list exactly L ({cfg.L}) values.")
        cap = getattr(cfg, cap_key)
        if any(v > cap for v in values):
            errors.append(f"{key} values must not exceed {cap_key} ({cap:g}).")
    return errors


def parse_config_text(text: str, base: Optional[SystemConfig] = None) -> Tuple[SystemConfig, List[str]]:
    """Parse ``key = value`` lines on top of ``base``; return the config and every error found."""
    errors: List[str] = []
    payload: Dict[str, str] = {}
    seen_at: Dict[str, int] = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got '{line}'.")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_NORMALIZERS:
            errors.append(f"{key}: unknown config key (line {lineno}).")
            continue
        if key in seen_at:
            errors.append(f"{key}: duplicate key (lines {seen_at[key]} and {lineno}).")
            continue
        seen_at[key] = lineno
        payload[key] = value

    cfg = base or SystemConfig()
    for key, value in payload.items():
        try:
            cfg = merge_config(cfg, {key: value})
        except ValueError as exc:
            errors.append(str(exc))
    errors.extend(validate_config(cfg))
    return cfg, errors


def load_config(path: Union[str, Path, None] = None) -> SystemConfig:
    """Load and validate a config file, raising :class:`ConfigError` listing every problem."""
    source = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    text = source.read_text(encoding="utf-8")
    cfg, errors = parse_config_text(text)
    if errors:
        raise ConfigError(errors, source=str(source))
    return cfg


def dump_config(cfg: SystemConfig) -> str:
    """Serialize ``cfg`` in the ``key = value`` format accepted by :func:`load_config`."""
    lines = []
    for key in CONFIG_KEYS:
        value = getattr(cfg, key)
        if isinstance(value, tuple):
            text = ", ".join(repr(v) for v in value)
        else:
            text = repr(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
