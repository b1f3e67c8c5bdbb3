"""``sweep``: Monte-Carlo comparison of the optimizer and the baseline over one parameter."""

import argparse
import math
import sys
import time
from pathlib import Path
from typing import List, Optional

from ..eval import trials as eval_trials
from ..file_handler import resolve_output_dir, write_config_snapshot, write_csv_rows
from ..opt import sca
from .common import EXIT_ERROR, EXIT_OK, configure_logging, load_config_or_report, report_error


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Sweep M, L or D and average the min effective rate over channel draws.")
    parser.add_argument("--config", default=None, help="Base config file. Defaults to the bundled setting.")
    parser.add_argument("--var", required=True, choices=sorted(eval_trials.SWEEP_FIELDS), help="Parameter to sweep.")
    parser.add_argument("--values", required=True, help="Comma-separated values of the swept parameter, e.g. 20,40,60.")
    parser.add_argument("--trials", type=int, default=50, help="Channel draws per value.")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the first draw; trial n uses seed + n.")
    parser.add_argument("--out", default=str(Path("results") / "sweep"), help="Directory for trials.csv and summary.csv.")
    parser.add_argument(
        "--jobs",
        type=int,
        default=None,
        help="Parallel worker processes. Defaults to the CPU count; 1 runs serially.",
    )
    parser.add_argument("--max-iter", type=int, default=sca.DEFAULT_MAX_ITER, help="SCA iteration cap per draw.")
    parser.add_argument("--rel-tol", type=float, default=sca.DEFAULT_REL_TOL, help="SCA stopping tolerance.")
    parser.add_argument("--verbose", action="store_true", help="Log per-draw summaries to stderr.")
    return parser


class _SweepProgress:
    """Per-draw progress on stderr; a TTY gets one line rewritten in place."""

    def __init__(self, label: str, trial_count: int, worker_count: int, stream=None):
        self.label = label
        self.trial_count = trial_count
        self.worker_count = worker_count
        self.stream = stream or sys.stderr
        self.started_at = time.perf_counter()
        self._live = bool(getattr(self.stream, "isatty", lambda: False)())
        self._width = 0

    def start(self) -> None:
        mode = "serial" if self.worker_count <= 1 else f"{self.worker_count} workers"
        self.message(f"[sweep] Starting {self.label}: {self.trial_count} draw(s), {mode}.")

    def update(self, completed: int, row: dict) -> None:
        elapsed_s = time.perf_counter() - self.started_at
        eta_s = elapsed_s / completed * max(0, self.trial_count - completed) if completed else 0.0
        line = (
            f"[sweep] {_progress_bar(completed, self.trial_count)} {completed}/{self.trial_count} "
            f"eta={_format_duration(eta_s)} last {row['sweep_var']}={row['value']} "
            f"seed={row['seed']} -> {row['status']}"
        )
        if not self._live:
            print(line, file=self.stream)
            return
        print(f"\r{line.ljust(self._width)}", end="", file=self.stream, flush=True)
        self._width = max(self._width, len(line))

    def message(self, text: str) -> None:
        self.finish()
        print(text, file=self.stream, flush=True)

    def finish(self) -> None:
        if self._width:
            print(file=self.stream, flush=True)
            self._width = 0


def _format_duration(seconds: float) -> str:
    if seconds < 60.0:
        return f"{seconds:.1f}s"
    minutes, secs = divmod(int(round(seconds)), 60)
    if minutes < 60:
        return f"{minutes}m{secs:02d}s"
    hours, minutes = divmod(minutes, 60)
    return f"{hours}h{minutes:02d}m"


def _progress_bar(completed: int, total: int, width: int = 20) -> str:
    if total <= 0:
        return "[" + ("-" * width) + "]"
    filled = min(width, int((completed * width) / total))
    return "[" + ("#" * filled) + ("-" * (width - filled)) + "]"


def _format_rate(value: float) -> str:
    return "n/a" if math.isnan(value) else f"{value / 1e6:.4f}"


def _print_summary(summary: List[dict]) -> None:
    print("__________________________________")
    print("Sweep complete (rates in Mbit/s, feasible pairs only).")
    for row in summary:
        gain = "n/a" if math.isnan(row["gain"]) else f"{100.0 * row['gain']:+.1f}%"
        print(
            f"{row['sweep_var']}={row['value']}: alg1 {_format_rate(row['mean_alg1'])} "
            f"bl {_format_rate(row['mean_bl'])} gain {gain} "
            f"({row['included']}/{row['trials']} draws, {row['alg1_infeasible']} alg1 infeasible, "
            f"{row['bl_infeasible']} bl infeasible)"
        )


def main(argv: Optional[List[str]] = None) -> int:
    """Run the sweep, write ``trials.csv``, ``summary.csv`` and ``config.cfg``."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.trials < 1:
        parser.error("--trials must be >= 1")
    if args.jobs is not None and args.jobs < 1:
        parser.error("--jobs must be >= 1")
    if args.max_iter < 1:
        parser.error("--max-iter must be >= 1")
    try:
        values = eval_trials.parse_sweep_values(args.var, args.values)
    except ValueError as exc:
        parser.error(str(exc))
    configure_logging(verbose=args.verbose)

    cfg = load_config_or_report(args.config)
    if cfg is None:
        return EXIT_ERROR
    try:
        jobs = eval_trials.build_sweep_jobs(
            cfg, args.var, values, args.trials, args.seed, max_iter=args.max_iter, rel_tol=args.rel_tol
        )
    except ValueError as exc:
        report_error(str(exc))
        return EXIT_ERROR

    worker_count = eval_trials.resolve_worker_count(args.jobs, len(jobs))
    progress = _SweepProgress(
        label=f"{args.var} sweep over {len(values)} value(s)",
        trial_count=len(jobs),
        worker_count=worker_count,
    )
    warned_parallel = False

    def on_trial_complete(completed: int, total: int, row: dict) -> None:
        del total
        progress.update(completed, row)

    def on_warning(message: str) -> None:
        nonlocal warned_parallel
        progress.message(message)
        if not warned_parallel and worker_count > 1:
            warned_parallel = True
            progress.message("[sweep] Continuing serially.")

    progress.start()
    try:
        rows = eval_trials.run_scheduled_trials(
            jobs, worker_count, on_trial_complete=on_trial_complete, on_warning=on_warning
        )
    finally:
        progress.finish()

    summary = eval_trials.summarize_trials(rows)
    out_dir = resolve_output_dir(args.out)
    write_csv_rows(rows, eval_trials.TRIAL_COLUMNS, out_dir / "trials.csv")
    write_csv_rows(summary, eval_trials.SUMMARY_COLUMNS, out_dir / "summary.csv")
    write_config_snapshot(cfg, out_dir / "config.cfg")
    _print_summary(summary)
    print(f"Wrote {out_dir / 'trials.csv'} and {out_dir / 'summary.csv'}")
    return EXIT_OK
