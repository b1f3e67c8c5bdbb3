import unittest

import numpy as np

from flmimo import oracle
from flmimo.model import rates
from flmimo.model.types import Allocation
from flmimo.system.config import SystemConfig, with_overrides
from flmimo.system.layout import channel_from_betas, pathloss_beta


def _toy_instance(t_qos=10.0):
    cfg = with_overrides(SystemConfig(), M=16, L=1, K=1, t_qos=t_qos)
    return cfg, channel_from_betas([5e-11], [2e-11], cfg)


class AxisTests(unittest.TestCase):
    def test_power_axis_is_sorted_and_spans_the_range(self):
        axis = oracle.power_axis(15)
        self.assertEqual(axis.shape, (15,))
        self.assertTrue(np.all(np.diff(axis) > 0))
        self.assertAlmostEqual(axis[0], 1e-3)
        self.assertEqual(axis[-1], 1.0)

    def test_frequency_axis_excludes_f_min(self):
        cfg = SystemConfig()
        axis = oracle.frequency_axis(cfg, 10)
        self.assertGreater(axis[0], cfg.f_min)
        self.assertEqual(axis[-1], cfg.f_max)


class GridSearchTests(unittest.TestCase):
    def test_too_many_free_variables_are_rejected(self):
        cfg = with_overrides(SystemConfig(), M=16, L=2, K=1)
        ch = channel_from_betas([5e-11, 5e-11], [2e-11], cfg)
        with self.assertRaisesRegex(ValueError, "at most 6 free variables, got 8"):
            oracle.grid_search(ch, cfg)

    def test_grid_parameters_are_checked(self):
        cfg, ch = _toy_instance()
        with self.assertRaisesRegex(ValueError, "steps must be at least 3"):
            oracle.grid_search(ch, cfg, steps=2)

    def test_unreachable_deadline_returns_no_allocation(self):
        cfg, ch = _toy_instance(t_qos=1e-4)
        result = oracle.grid_search(ch, cfg, steps=4, rounds=2)
        self.assertFalse(result.feasible)
        self.assertIsNone(result.allocation)
        self.assertEqual(result.min_eff_rate, 0.0)

    def test_refinement_rounds_never_lose_ground(self):
        cfg, ch = _toy_instance()
        result = oracle.grid_search(ch, cfg, steps=5, rounds=3)
        self.assertTrue(result.feasible)
        self.assertEqual(len(result.round_best), 3)
        for before, after in zip(result.round_best, result.round_best[1:]):
            self.assertGreaterEqual(after, before)
        self.assertEqual(rates.check_feasibility(result.allocation, ch, cfg), [])
        self.assertAlmostEqual(result.min_eff_rate / result.round_best[-1], 1.0, places=9)

    def test_single_non_fl_user_takes_full_power_in_later_phases(self):
        cfg, ch = _toy_instance()
        result = oracle.grid_search(ch, cfg, steps=5, rounds=2)
        self.assertAlmostEqual(float(result.allocation.zeta_2[0]), 1.0)
        self.assertAlmostEqual(float(result.allocation.zeta_3[0]), 1.0)

    def test_incumbent_is_never_undercut(self):
        cfg, ch = _toy_instance()
        incumbent = Allocation([0.37], [0.6], [0.93], [0.77], [0.88], f=0.9 * cfg.f_max)
        floor = rates.evaluate(incumbent, ch, cfg).min_eff_rate
        result = oracle.grid_search(ch, cfg, steps=3, rounds=1, incumbents=[incumbent])
        self.assertGreaterEqual(result.min_eff_rate, floor * (1.0 - 1e-9))

    def test_doubling_every_distance_lowers_the_optimum(self):
        cfg, near = _toy_instance()
        factor = pathloss_beta(200.0) / pathloss_beta(100.0)
        far = channel_from_betas([5e-11 * factor], [2e-11 * factor], cfg)

        near_best = oracle.grid_search(near, cfg, steps=5, rounds=1)
        far_best = oracle.grid_search(far, cfg, steps=5, rounds=1)
        self.assertTrue(far_best.feasible)
        self.assertGreater(near_best.min_eff_rate, far_best.min_eff_rate)

    def test_search_is_deterministic(self):
        cfg, ch = _toy_instance()
        first = oracle.grid_search(ch, cfg, steps=4, rounds=2)
        second = oracle.grid_search(ch, cfg, steps=4, rounds=2)
        self.assertEqual(first.allocation, second.allocation)
        self.assertEqual(first.round_best, second.round_best)


if __name__ == "__main__":
    unittest.main()
