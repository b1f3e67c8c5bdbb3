"""``solve``: run the optimizer and the baseline on one seeded channel draw."""

import argparse
import math
from pathlib import Path
from typing import Dict, List, Optional

from ..baseline import bl_allocation
from ..file_handler import resolve_output_dir, write_csv_rows
from ..model.rates import evaluate, report_columns, report_row
from ..model.types import Infeasible
from ..opt import sca
from ..system.config import SystemConfig
from ..system.layout import sample_layout
from .common import EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK, configure_logging, load_config_or_report, report_error

TRACE_COLUMNS = ("iteration", "z", "min_eff_rate", "solver_status")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Solve one seeded channel draw with SCA and the equal-power baseline.",
        epilog=(
            "Exit status: 0 when a feasible allocation is written (SCA status converged, max-iter or "
            "stalled; the status column of solve.csv tells them apart), 2 for an infeasible instance, "
            "1 for config or input errors."
        ),
    )
    parser.add_argument("--config", default=None, help="Config file (key = value). Defaults to the bundled setting.")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the UE layout and shadowing draw.")
    parser.add_argument("--out", default=str(Path("results") / "solve"), help="Directory for solve.csv and trace.csv.")
    parser.add_argument("--max-iter", type=int, default=sca.DEFAULT_MAX_ITER, help="SCA iteration cap.")
    parser.add_argument("--rel-tol", type=float, default=sca.DEFAULT_REL_TOL, help="Relative change in z that stops SCA.")
    parser.add_argument("--trace", action="store_true", help="Log solver iterations to stderr and write trace.csv.")
    parser.add_argument("--verbose", action="store_true", help="Log run summaries to stderr.")
    return parser


def allocation_columns(cfg: SystemConfig) -> List[str]:
    columns = []
    for name, count in (("eta_d", cfg.L), ("zeta_1", cfg.K), ("zeta_2", cfg.K), ("eta_u", cfg.L), ("zeta_3", cfg.K)):
        columns.extend(f"{name}_{i}" for i in range(count))
    columns.append("f")
    return columns


def solve_columns(cfg: SystemConfig) -> List[str]:
    """Column order of solve.csv: run summary, allocation, then the full rate report."""
    head = ["seed", "status", "iterations", "final_z", "min_eff_rate", "bl_status", "bl_min_eff_rate", "wall_time_s"]
    return head + allocation_columns(cfg) + [
        column for column in report_columns(cfg.L, cfg.K) if column != "min_eff_rate"
    ]


def solve_row(seed: int, report: sca.SolveReport, cfg: SystemConfig, bl_rate: float, bl_status: str) -> Dict[str, object]:
    row: Dict[str, object] = {
        "seed": seed,
        "status": report.status,
        "iterations": report.iterations,
        "final_z": report.z_trace[-1] if report.z_trace else math.nan,
        "min_eff_rate": report.min_eff_rate,
        "bl_status": bl_status,
        "bl_min_eff_rate": bl_rate,
        "wall_time_s": report.wall_time_s,
    }
    if report.allocation is not None:
        row.update(report.allocation.as_dict())
    if report.rate_report is not None:
        row.update(report_row(report.rate_report))
        row["min_eff_rate"] = report.min_eff_rate
    return row


def main(argv: Optional[List[str]] = None) -> int:
    """Solve one instance, write ``solve.csv`` (and ``trace.csv``), return the exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.max_iter < 1:
        parser.error("--max-iter must be >= 1")
    if not args.rel_tol > 0:
        parser.error("--rel-tol must be positive")
    configure_logging(trace=args.trace, verbose=args.verbose)

    cfg = load_config_or_report(args.config)
    if cfg is None:
        return EXIT_ERROR

    try:
        ch = sample_layout(cfg, args.seed)
        report = sca.run(ch, cfg, max_iter=args.max_iter, rel_tol=args.rel_tol)
        baseline = bl_allocation(ch, cfg)
    except ValueError as exc:
        report_error(str(exc))
        return EXIT_ERROR

    if isinstance(baseline, Infeasible):
        bl_rate, bl_status = math.nan, "infeasible"
    else:
        bl_rate, bl_status = evaluate(baseline, ch, cfg).min_eff_rate, "feasible"

    out_dir = resolve_output_dir(args.out)
    solve_path = write_csv_rows([solve_row(args.seed, report, cfg, bl_rate, bl_status)], solve_columns(cfg), out_dir / "solve.csv")
    if args.trace:
        write_csv_rows(sca.trace_rows(report), TRACE_COLUMNS, out_dir / "trace.csv")

    if report.status == sca.STATUS_INFEASIBLE:
        print(f"seed={args.seed} status={report.status}: {report.reason}")
        print(f"Wrote {solve_path}")
        return EXIT_INFEASIBLE

    print(
        f"seed={args.seed} status={report.status} iterations={report.iterations} "
        f"min_eff_rate={report.min_eff_rate / 1e6:.4f} Mbit/s "
        f"baseline={'infeasible' if math.isnan(bl_rate) else f'{bl_rate / 1e6:.4f} Mbit/s'} "
        f"time={report.wall_time_s:.2f}s"
    )
    print(f"Wrote {solve_path}")
    return EXIT_OK
