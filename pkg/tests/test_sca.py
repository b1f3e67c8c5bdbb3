import os
import unittest
from unittest import mock

import numpy as np

from flmimo import oracle
from flmimo.baseline import bl_allocation
from flmimo.model import rates
from flmimo.model.types import Allocation, Infeasible
from flmimo.opt import sca
from flmimo.opt.cvxsolve import STATUS_FAILED
from flmimo.opt.surrogate import sca_layout
from flmimo.system.config import SystemConfig, with_overrides
from flmimo.system.layout import channel_from_betas, sample_layout

RUN_SLOW_TESTS = os.environ.get("FLMIMO_SLOW_TESTS") == "1"


def _small_instance(t_qos=10.0):
    cfg = with_overrides(SystemConfig(), M=20, L=2, K=2, t_qos=t_qos)
    ch = channel_from_betas([2e-11, 5e-11], [1e-11, 3e-11], cfg)
    return cfg, ch


class InitializeTests(unittest.TestCase):
    def test_generous_deadline_gives_strictly_feasible_state(self):
        cfg, ch = _small_instance()
        state = sca.initialize(ch, cfg)

        self.assertIsInstance(state, sca.SCAState)
        self.assertEqual(rates.check_feasibility(state.allocation, ch, cfg), [])
        self.assertGreater(state.z, 0.0)
        self.assertLess(state.z * state.t_q, state.t)
        self.assertLess(sum(rates.phase_times(state.allocation, ch, cfg)), state.t_q)
        self.assertLess(state.t_q, cfg.t_qos)
        self.assertLess(state.allocation.f, cfg.f_max)

    def test_start_sits_below_the_exact_objective(self):
        cfg, ch = _small_instance()
        state = sca.initialize(ch, cfg)
        self.assertLess(state.z, rates.evaluate(state.allocation, ch, cfg).min_eff_rate)

    def test_deadline_shorter_than_fastest_computation_is_infeasible(self):
        cfg, ch = _small_instance()
        cfg = with_overrides(cfg, t_qos=0.5 * cfg.compute_cycles / cfg.f_max)
        result = sca.initialize(ch, cfg)
        self.assertIsInstance(result, Infeasible)
        self.assertIn("exceeds t_qos", result.reason)

    def test_pack_and_unpack_restore_the_state(self):
        cfg, ch = _small_instance()
        state = sca.initialize(ch, cfg)
        layout = sca_layout(cfg.L, cfg.K)
        restored = sca.unpack_state(sca.pack_state(state, layout), layout)

        for name in ("eta_d", "zeta_1", "zeta_2", "eta_u", "zeta_3"):
            np.testing.assert_array_equal(getattr(restored.allocation, name), getattr(state.allocation, name))
        self.assertAlmostEqual(restored.allocation.f / state.allocation.f, 1.0, places=14)
        for name in ("t", "t_q", "z", "r_d", "r_u", "a_1", "a_2", "a_3", "rt_d", "rt_u"):
            self.assertAlmostEqual(getattr(restored, name) / getattr(state, name), 1.0, places=14, msg=name)
        for name in ("r_1", "r_2", "r_3"):
            np.testing.assert_allclose(getattr(restored, name), getattr(state, name), rtol=1e-14)

    def test_subproblem_accepts_the_state_as_strict_interior_point(self):
        cfg, ch = _small_instance()
        state = sca.initialize(ch, cfg)
        program = sca.build_subproblem(state, ch, cfg)
        start = sca.pack_state(state, program.layout)
        self.assertEqual(program.violated(start), [])
        self.assertTrue(np.all(program.residuals(start) < 0.0))


class EpigraphTests(unittest.TestCase):
    def test_ratio_equals_min_effective_rate(self):
        cfg = with_overrides(SystemConfig(), M=20, L=2, K=3)
        rng = np.random.default_rng(3)
        for seed in range(100):
            ch = sample_layout(cfg, seed)
            s1 = rng.uniform(0.1, 1.0, cfg.L + cfg.K)
            s1 /= s1.sum()
            a = Allocation(
                eta_d=s1[: cfg.L],
                zeta_1=s1[cfg.L:],
                zeta_2=np.full(cfg.K, 1.0 / cfg.K),
                eta_u=rng.uniform(0.2, 1.0, cfg.L),
                zeta_3=rng.dirichlet(np.ones(cfg.K)),
                f=rng.uniform(0.1, 1.0) * cfg.f_max,
            )
            point = sca.epigraph_value(a, ch, cfg)
            exact = rates.evaluate(a, ch, cfg).min_eff_rate
            self.assertAlmostEqual(point.ratio / exact, 1.0, places=9)
            self.assertEqual(point.t_q, rates.evaluate(a, ch, cfg).round_time)


class IterationTests(unittest.TestCase):
    def test_one_iteration_never_lowers_z(self):
        cfg, ch = _small_instance()
        state = sca.initialize(ch, cfg)
        nxt = sca.iterate(state, ch, cfg)
        self.assertEqual(nxt.iteration, 1)
        self.assertGreaterEqual(nxt.z, state.z)
        self.assertEqual(rates.check_feasibility(nxt.allocation, ch, cfg), [])

    def test_run_is_monotone_feasible_and_bounded_by_exact_objective(self):
        cfg, ch = _small_instance()
        report = sca.run(ch, cfg, max_iter=15)

        self.assertIn(report.status, (sca.STATUS_CONVERGED, sca.STATUS_MAX_ITER))
        self.assertTrue(report.feasible)
        self.assertEqual(len(report.z_trace), len(report.history))
        for before, after in zip(report.z_trace, report.z_trace[1:]):
            self.assertGreaterEqual(after, before * (1.0 - 1e-8))
        for record in report.history:
            self.assertEqual(rates.check_feasibility(record.allocation, ch, cfg), [], msg=record.iteration)
            self.assertGreaterEqual(record.min_eff_rate, record.z * (1.0 - 1e-6))
        self.assertGreaterEqual(report.min_eff_rate, report.z_trace[-1] * (1.0 - 1e-6))
        self.assertEqual(report.min_eff_rate, report.rate_report.min_eff_rate)

    def test_run_beats_the_equal_power_baseline(self):
        cfg, ch = _small_instance()
        baseline = bl_allocation(ch, cfg)
        self.assertNotIsInstance(baseline, Infeasible)
        report = sca.run(ch, cfg, max_iter=15)
        self.assertGreaterEqual(report.min_eff_rate, rates.evaluate(baseline, ch, cfg).min_eff_rate)

    def test_run_is_deterministic(self):
        cfg, ch = _small_instance()
        first = sca.run(ch, cfg, max_iter=5)
        second = sca.run(ch, cfg, max_iter=5)
        self.assertEqual(first.z_trace, second.z_trace)
        self.assertEqual(first.allocation, second.allocation)
        self.assertEqual(first.iterations, second.iterations)

    def test_max_iter_caps_the_iteration_count(self):
        cfg, ch = _small_instance()
        report = sca.run(ch, cfg, max_iter=1, rel_tol=0.0)
        self.assertEqual(report.iterations, 1)
        self.assertEqual(report.status, sca.STATUS_MAX_ITER)

    def test_failed_subproblem_that_stops_moving_is_stalled_not_converged(self):
        cfg, ch = _small_instance()
        with mock.patch("flmimo.opt.cvxsolve._newton_step", return_value=None):
            report = sca.run(ch, cfg, max_iter=5)

        self.assertEqual(report.status, sca.STATUS_STALLED)
        self.assertEqual(report.iterations, 1)
        self.assertEqual(report.history[-1].solver_status, STATUS_FAILED)
        self.assertAlmostEqual(report.z_trace[1] / report.z_trace[0], 1.0, places=12)
        self.assertTrue(report.feasible)

    def test_infeasible_instance_reports_no_allocation(self):
        cfg, ch = _small_instance(t_qos=1e-3)
        report = sca.run(ch, cfg)
        self.assertEqual(report.status, sca.STATUS_INFEASIBLE)
        self.assertIsNone(report.allocation)
        self.assertEqual(report.min_eff_rate, 0.0)
        self.assertEqual(report.z_trace, ())
        self.assertTrue(report.reason)

    def test_trace_rows_follow_history(self):
        cfg, ch = _small_instance()
        report = sca.run(ch, cfg, max_iter=3)
        rows = sca.trace_rows(report)
        self.assertEqual([row["iteration"] for row in rows], list(range(len(report.history))))
        self.assertEqual(set(rows[0]), {"iteration", "z", "min_eff_rate", "solver_status"})


@unittest.skipUnless(RUN_SLOW_TESTS, "set FLMIMO_SLOW_TESTS=1 to run the slow SCA suites")
class SlowScaTests(unittest.TestCase):
    def test_single_user_pair_is_close_to_grid_optimum(self):
        cfg = with_overrides(SystemConfig(), M=16, L=1, K=1, t_qos=10)
        for seed in range(10):
            ch = sample_layout(cfg, seed)
            report = sca.run(ch, cfg)
            best = oracle.grid_search(ch, cfg)
            if not best.feasible:
                continue
            self.assertGreaterEqual(report.min_eff_rate, 0.95 * best.min_eff_rate, msg=f"seed {seed}")

    def test_default_instances_are_monotone_and_beat_the_baseline(self):
        cfg = SystemConfig()
        solved = 0
        for seed in range(50):
            ch = sample_layout(cfg, seed)
            report = sca.run(ch, cfg)
            if not report.feasible:
                continue
            solved += 1
            for before, after in zip(report.z_trace, report.z_trace[1:]):
                self.assertGreaterEqual(after, before * (1.0 - 1e-8), msg=f"seed {seed}")
            for record in report.history:
                self.assertEqual(
                    rates.check_feasibility(record.allocation, ch, cfg), [], msg=f"seed {seed} iteration {record.iteration}"
                )
            self.assertGreaterEqual(report.min_eff_rate, report.z_trace[-1] * (1.0 - 1e-6))
            baseline = bl_allocation(ch, cfg)
            if not isinstance(baseline, Infeasible):
                bl_rate = rates.evaluate(baseline, ch, cfg).min_eff_rate
                self.assertGreaterEqual(report.min_eff_rate, bl_rate, msg=f"seed {seed}")
        self.assertGreaterEqual(solved, 25)


if __name__ == "__main__":
    unittest.main()
