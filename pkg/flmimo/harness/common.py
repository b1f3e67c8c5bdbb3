"""Pieces shared by the command-line entry points."""

import logging
import sys
from typing import Optional

from ..system.config import ConfigError, SystemConfig, load_config

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2

LOG_FORMAT = "[%(name)s] %(message)s"


def configure_logging(trace: bool = False, verbose: bool = False) -> None:
    """``--trace`` shows solver iterations (DEBUG), ``--verbose`` run summaries (INFO)."""
    if trace:
        level = logging.DEBUG
    elif verbose:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def report_error(text: str, stream=None) -> None:
    print(f"error: {text}", file=stream or sys.stderr)


def load_config_or_report(path: Optional[str]) -> Optional[SystemConfig]:
    """Load a config file, printing every problem to stderr and returning ``None`` on failure."""
    try:
        return load_config(path)
    except ConfigError as exc:
        where = f"{exc.source}: " if exc.source else ""
        for message in exc.errors:
            report_error(where + message)
    except OSError as exc:
        report_error(f"cannot read config: {exc}")
    return None
