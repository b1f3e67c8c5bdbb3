"""Joint power and computing-frequency allocation for FL and non-FL users of a massive-MIMO cell.

Package exports stay lazy so ``python run.py sweep`` worker processes only
import the modules a trial needs.
"""

__all__ = [
    "SystemConfig",
    "load_config",
    "sample_layout",
    "evaluate",
    "bl_allocation",
    "run",
]


def __getattr__(name):
    """Resolve top-level exports lazily to avoid import cycles."""
    if name in {"SystemConfig", "load_config"}:
        from .system import config

        return getattr(config, name)
    if name == "sample_layout":
        from .system.layout import sample_layout

        return sample_layout
    if name == "evaluate":
        from .model.rates import evaluate

        return evaluate
    if name == "bl_allocation":
        from .baseline import bl_allocation

        return bl_allocation
    if name == "run":
        from .opt.sca import run

        return run
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
