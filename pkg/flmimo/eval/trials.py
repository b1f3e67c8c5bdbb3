"""Monte-Carlo trial scheduling for parameter sweeps.

A sweep is a flat list of job dicts (one per sweep value and channel draw),
each carrying an ``index``.  Jobs run in a process pool when one is
available and serially otherwise; results always come back sorted by
``index`` so the reduction is independent of completion order.
"""

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from concurrent.futures.process import BrokenProcessPool
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..baseline import bl_allocation
from ..model.rates import evaluate
from ..model.types import Infeasible
from ..opt import sca
from ..system.config import SystemConfig, validate_config, with_overrides
from ..system.layout import sample_layout

SWEEP_FIELDS = {"M": "M", "L": "L", "D": "D_side"}

TRIAL_COLUMNS = (
    "index",
    "sweep_var",
    "value",
    "trial",
    "seed",
    "min_eff_rate_alg1",
    "min_eff_rate_bl",
    "iterations",
    "status",
    "bl_status",
)

SUMMARY_COLUMNS = (
    "sweep_var",
    "value",
    "trials",
    "included",
    "excluded",
    "alg1_infeasible",
    "bl_infeasible",
    "mean_alg1",
    "std_alg1",
    "mean_bl",
    "std_bl",
    "mean_iterations",
    "gain",
)


def parse_sweep_values(var: str, text: str) -> List[float]:
    """Parse ``"20,40,60"`` for sweep variable ``var`` (integers for M and L)."""
    if var not in SWEEP_FIELDS:
        raise ValueError(f"Unsupported sweep variable '{var}'. Choose from {', '.join(SWEEP_FIELDS)}.")
    parts = [part.strip() for part in str(text).split(",") if part.strip()]
    if not parts:
        raise ValueError("--values must list at least one value.")
    values = []
    for part in parts:
        try:
            number = float(part)
        except ValueError as exc:
            raise ValueError(f"sweep value '{part}' is not a number.") from exc
        if var in ("M", "L"):
            if not number.is_integer():
                raise ValueError(f"sweep value '{part}' must be an integer for {var}.")
            number = int(number)
        values.append(number)
    return values


def sweep_config(cfg: SystemConfig, var: str, value: float) -> SystemConfig:
    return with_overrides(cfg, **{SWEEP_FIELDS[var]: value})


def build_sweep_jobs(
    cfg: SystemConfig,
    var: str,
    values: Sequence[float],
    trials: int,
    seed: int,
    max_iter: int = sca.DEFAULT_MAX_ITER,
    rel_tol: float = sca.DEFAULT_REL_TOL,
) -> List[dict]:
    """One job per (value, trial).  Trial ``n`` uses seed ``seed + n`` for every value.

    Raises ``ValueError`` if any swept config violates an invariant.
    """
    jobs = []
    for value in values:
        swept = sweep_config(cfg, var, value)
        errors = validate_config(swept)
        if errors:
            raise ValueError(f"{var}={value}: " + "; ".join(errors))
        for trial in range(trials):
            jobs.append(
                {
                    "index": len(jobs),
                    "sweep_var": var,
                    "value": value,
                    "trial": trial,
                    "seed": seed + trial,
                    "config": swept,
                    "max_iter": max_iter,
                    "rel_tol": rel_tol,
                }
            )
    return jobs


def resolve_worker_count(requested_jobs: Optional[int], trial_count: int) -> int:
    """Resolve the effective worker count for a sweep."""
    if trial_count <= 0:
        return 0
    requested = requested_jobs if requested_jobs is not None else (os.cpu_count() or 1)
    return max(1, min(requested, trial_count))


def run_trial(job: dict) -> dict:
    """Solve one channel draw with the optimizer and the baseline; return a CSV-ready row."""
    start_time = time.perf_counter()
    cfg = job["config"]
    ch = sample_layout(cfg, job["seed"])
    report = sca.run(ch, cfg, max_iter=job.get("max_iter", sca.DEFAULT_MAX_ITER), rel_tol=job.get("rel_tol", sca.DEFAULT_REL_TOL))
    baseline = bl_allocation(ch, cfg)
    if isinstance(baseline, Infeasible):
        bl_rate, bl_status = math.nan, "infeasible"
    else:
        bl_rate, bl_status = evaluate(baseline, ch, cfg).min_eff_rate, "feasible"
    return {
        "index": job["index"],
        "sweep_var": job["sweep_var"],
        "value": job["value"],
        "trial": job["trial"],
        "seed": job["seed"],
        "min_eff_rate_alg1": report.min_eff_rate if report.feasible else math.nan,
        "min_eff_rate_bl": bl_rate,
        "iterations": report.iterations,
        "status": report.status,
        "bl_status": bl_status,
        "duration_s": time.perf_counter() - start_time,
    }


def _shutdown_executor(executor: ProcessPoolExecutor) -> None:
    """Best-effort executor shutdown that cancels queued work when supported."""
    try:
        executor.shutdown(cancel_futures=True)
    except TypeError:
        executor.shutdown()


def _run_serial(
    jobs: Iterable[dict],
    total: int,
    on_trial_complete: Optional[Callable[[int, int, dict], None]],
    start_completed: int = 0,
) -> List[dict]:
    results = []
    completed = start_completed
    for job in jobs:
        result = run_trial(job)
        results.append(result)
        completed += 1
        if on_trial_complete is not None:
            on_trial_complete(completed, total, result)
    return results


def _parallel_warning(exc: BaseException) -> str:
    return (
        "Warning: parallel sweep execution is unavailable "
        f"({exc.__class__.__name__}: {exc}). Continuing serially."
    )


def run_scheduled_trials(
    jobs: List[dict],
    worker_count: int,
    on_trial_complete: Optional[Callable[[int, int, dict], None]] = None,
    on_warning: Optional[Callable[[str], None]] = None,
) -> List[dict]:
    """Run scheduled trials, using parallel workers when available."""
    total = len(jobs)
    if worker_count <= 1:
        return _run_serial(jobs, total, on_trial_complete)

    results = []
    job_iter = iter(jobs)
    completed = 0

    try:
        executor = ProcessPoolExecutor(max_workers=worker_count)
    except (BrokenProcessPool, OSError, PermissionError) as exc:
        if on_warning is not None:
            on_warning(_parallel_warning(exc))
        return _run_serial(jobs, total, on_trial_complete)

    futures = {}
    try:
        while len(futures) < min(worker_count, total):
            job = next(job_iter, None)
            if job is None:
                break
            futures[executor.submit(run_trial, job)] = job

        while futures:
            try:
                future = next(as_completed(list(futures.keys())))
            except KeyboardInterrupt:
                for pending in futures:
                    pending.cancel()
                _shutdown_executor(executor)
                raise

            job = futures.pop(future)
            try:
                result = future.result()
            except (BrokenProcessPool, OSError, PermissionError) as exc:
                if on_warning is not None:
                    on_warning(_parallel_warning(exc))
                remaining_jobs = [job]
                remaining_jobs.extend(futures[pending] for pending in futures)
                remaining_jobs.extend(list(job_iter))
                for pending in futures:
                    pending.cancel()
                _shutdown_executor(executor)
                results.extend(_run_serial(remaining_jobs, total, on_trial_complete, start_completed=completed))
                return sorted(results, key=lambda item: item["index"])

            results.append(result)
            completed += 1
            if on_trial_complete is not None:
                on_trial_complete(completed, total, result)

            next_job = next(job_iter, None)
            if next_job is not None:
                futures[executor.submit(run_trial, next_job)] = next_job
    finally:
        _shutdown_executor(executor)

    return sorted(results, key=lambda item: item["index"])


def _mean_std(values: List[float]) -> Dict[str, float]:
    if not values:
        return {"mean": math.nan, "std": math.nan}
    array = np.asarray(values, dtype=float)
    std = float(array.std(ddof=1)) if array.size > 1 else 0.0
    return {"mean": float(array.mean()), "std": std}


def summarize_trials(rows: Sequence[dict]) -> List[dict]:
    """Mean and spread per sweep value over trials where both schemes are feasible.

    Trials where either scheme is infeasible are excluded from both means so
    the comparison stays paired; the counts of each kind are reported.
    """
    grouped: Dict[object, List[dict]] = {}
    for row in rows:
        grouped.setdefault(row["value"], []).append(row)

    summary = []
    for value, group in grouped.items():
        alg1_infeasible = sum(1 for row in group if row["status"] == sca.STATUS_INFEASIBLE)
        bl_infeasible = sum(1 for row in group if row["bl_status"] != "feasible")
        included = [
            row for row in group if row["status"] != sca.STATUS_INFEASIBLE and row["bl_status"] == "feasible"
        ]
        alg1 = _mean_std([row["min_eff_rate_alg1"] for row in included])
        bl = _mean_std([row["min_eff_rate_bl"] for row in included])
        iterations = [row["iterations"] for row in included]
        gain = alg1["mean"] / bl["mean"] - 1.0 if included and bl["mean"] > 0 else math.nan
        summary.append(
            {
                "sweep_var": group[0]["sweep_var"],
                "value": value,
                "trials": len(group),
                "included": len(included),
                "excluded": len(group) - len(included),
                "alg1_infeasible": alg1_infeasible,
                "bl_infeasible": bl_infeasible,
                "mean_alg1": alg1["mean"],
                "std_alg1": alg1["std"],
                "mean_bl": bl["mean"],
                "std_bl": bl["std"],
                "mean_iterations": float(np.mean(iterations)) if iterations else math.nan,
                "gain": gain,
            }
        )
    return summary
