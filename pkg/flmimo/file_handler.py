"""File I/O helpers for result tables and config snapshots.

Floats are written with ``repr`` so repeated runs produce byte-identical
files; everything else goes through ``str``.
"""

import csv
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Union

from .system.config import SystemConfig, dump_config

PathLike = Union[str, Path]


def format_cell(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def resolve_output_dir(path: PathLike) -> Path:
    """Create ``path`` (and parents) if needed and return it."""
    output_dir = Path(path)
    output_dir.mkdir(parents=True, exist_ok=True)
    return output_dir


def write_csv_rows(rows: Iterable[Mapping[str, object]], columns: Sequence[str], path: PathLike) -> Path:
    """Write ``rows`` under a header of ``columns``; keys outside ``columns`` are dropped."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_cell(row.get(key)) for key in columns})
    return target


def read_csv_rows(path: PathLike) -> List[Dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def write_config_snapshot(cfg: SystemConfig, path: PathLike) -> Path:
    """Store the config a run used next to its results."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(dump_config(cfg), encoding="utf-8")
    return target
