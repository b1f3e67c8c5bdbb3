"""``oracle``: compare the optimizer against exhaustive grid search on a toy instance."""

import argparse
import math
from pathlib import Path
from typing import Dict, List, Optional

from .. import oracle as grid
from ..file_handler import resolve_output_dir, write_csv_rows
from ..opt import sca
from ..system.layout import sample_layout
from .common import EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK, configure_logging, load_config_or_report, report_error

ORACLE_COLUMNS = (
    "seed",
    "oracle_status",
    "oracle_min_eff_rate",
    "oracle_points",
    "alg1_status",
    "alg1_min_eff_rate",
    "relative_gap",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Grid-search the exact problem on a toy instance and compare with SCA.")
    parser.add_argument("--config", default=None, help="Config file; L and K must be small enough for the grid.")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the layout draw.")
    parser.add_argument("--steps", type=int, default=grid.DEFAULT_STEPS, help="Grid points per axis.")
    parser.add_argument("--rounds", type=int, default=grid.DEFAULT_ROUNDS, help="Coarse grid plus zoom rounds.")
    parser.add_argument("--out", default=str(Path("results") / "oracle"), help="Directory for oracle.csv.")
    parser.add_argument("--max-iter", type=int, default=sca.DEFAULT_MAX_ITER, help="SCA iteration cap.")
    parser.add_argument("--verbose", action="store_true", help="Log grid rounds and solver summaries to stderr.")
    return parser


def relative_gap(oracle_rate: float, alg1_rate: float) -> float:
    """``(oracle - alg1) / oracle``; NaN when the oracle found nothing positive."""
    if not oracle_rate > 0.0 or math.isnan(alg1_rate):
        return math.nan
    return (oracle_rate - alg1_rate) / oracle_rate


def oracle_row(seed: int, result: grid.OracleResult, report: sca.SolveReport) -> Dict[str, object]:
    alg1_rate = report.min_eff_rate if report.feasible else math.nan
    oracle_rate = result.min_eff_rate if result.feasible else math.nan
    return {
        "seed": seed,
        "oracle_status": "feasible" if result.feasible else "infeasible",
        "oracle_min_eff_rate": oracle_rate,
        "oracle_points": result.evaluated,
        "alg1_status": report.status,
        "alg1_min_eff_rate": alg1_rate,
        "relative_gap": relative_gap(oracle_rate, alg1_rate),
    }


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.steps < 3:
        parser.error("--steps must be >= 3")
    if args.rounds < 1:
        parser.error("--rounds must be >= 1")
    configure_logging(verbose=args.verbose)

    cfg = load_config_or_report(args.config)
    if cfg is None:
        return EXIT_ERROR
    dims = grid.free_variable_count(cfg)
    if dims > grid.MAX_FREE_VARIABLES:
        report_error(
            f"oracle needs 2L + 3K + 1 <= {grid.MAX_FREE_VARIABLES} free variables; "
            f"L={cfg.L}, K={cfg.K} gives {dims}."
        )
        return EXIT_ERROR

    ch = sample_layout(cfg, args.seed)
    result = grid.grid_search(ch, cfg, steps=args.steps, rounds=args.rounds)
    report = sca.run(ch, cfg, max_iter=args.max_iter)
    row = oracle_row(args.seed, result, report)
    path = write_csv_rows([row], ORACLE_COLUMNS, resolve_output_dir(args.out) / "oracle.csv")

    if not result.feasible and not report.feasible:
        print(f"seed={args.seed}: no feasible allocation found by either method.")
        print(f"Wrote {path}")
        return EXIT_INFEASIBLE

    gap = row["relative_gap"]
    print(
        f"seed={args.seed} oracle={row['oracle_status']} "
        f"{row['oracle_min_eff_rate'] / 1e6:.6f} Mbit/s ({result.evaluated} points) "
        f"alg1={report.status} {row['alg1_min_eff_rate'] / 1e6:.6f} Mbit/s "
        f"gap={'n/a' if math.isnan(gap) else f'{100.0 * gap:+.3f}%'}"
    )
    print(f"Wrote {path}")
    return EXIT_OK
