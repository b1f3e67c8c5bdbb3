import math
import unittest

import numpy as np

from flmimo import oracle
from flmimo.baseline import bl_allocation
from flmimo.model import rates
from flmimo.model.types import Allocation
from flmimo.system.config import SystemConfig, with_overrides
from flmimo.system.layout import ChannelState, sample_layout


def _random_allocation(rng, cfg, f=None):
    """Random allocation with every power budget met and every coefficient well away from zero."""
    s1 = rng.uniform(0.2, 1.0, cfg.L + cfg.K)
    s1 *= rng.uniform(0.5, 1.0) / s1.sum()
    zeta_2 = rng.uniform(0.2, 1.0, cfg.K)
    zeta_2 *= rng.uniform(0.5, 1.0) / zeta_2.sum()
    zeta_3 = rng.uniform(0.2, 1.0, cfg.K)
    zeta_3 *= rng.uniform(0.5, 1.0) / zeta_3.sum()
    return Allocation(
        eta_d=s1[: cfg.L],
        zeta_1=s1[cfg.L:],
        zeta_2=zeta_2,
        eta_u=rng.uniform(0.3, 1.0, cfg.L),
        zeta_3=zeta_3,
        f=cfg.f_max * rng.uniform(0.2, 1.0) if f is None else f,
    )


def _reference_eff_rates(a, ch, cfg):
    """Loop-by-loop evaluation of the closed-form rates, written independently of the vectorized model."""
    L, K, M = cfg.L, cfg.K, cfg.M
    rho_d, rho_u = cfg.rho_d, cfg.rho_u

    def rate(gamma, tau, band):
        return (cfg.tau_c - tau) / cfg.tau_c * band * math.log1p(gamma) / math.log(2.0)

    s1_load = sum(a.eta_d) + sum(a.zeta_1)
    r_d = min(
        rate(rho_d * a.eta_d[l] * (M - L - K) * ch.sigma2_d[l] / (1 + rho_d * (ch.beta_fl[l] - ch.sigma2_d[l]) * s1_load), cfg.tau_dp, cfg.B)
        for l in range(L)
    )
    leak = sum((ch.beta_fl[j] - ch.sigma2_u[j]) * a.eta_u[j] for j in range(L))
    r_u = min(
        rate(rho_u * a.eta_u[l] * (M - L) * ch.sigma2_u[l] / (1 + rho_u * leak), cfg.tau_up, cfg.B / 2)
        for l in range(L)
    )
    t_d = cfg.S_d / r_d
    t_c = cfg.N_c * cfg.D_bar * cfg.c_bar / a.f
    t_u = cfg.S_u / r_u
    out = []
    for k in range(K):
        g1 = rho_d * a.zeta_1[k] * (M - L - K) * ch.sigma2_1[k] / (1 + rho_d * (ch.beta_nfl[k] - ch.sigma2_1[k]) * s1_load)
        g2 = rho_d * a.zeta_2[k] * (M - K) * ch.sigma2_2[k] / (1 + rho_d * (ch.beta_nfl[k] - ch.sigma2_2[k]) * sum(a.zeta_2))
        g3 = rho_d * a.zeta_3[k] * (M - K) * ch.sigma2_3[k] / (1 + rho_d * (ch.beta_nfl[k] - ch.sigma2_3[k]) * sum(a.zeta_3))
        received = rate(g1, cfg.tau_1p, cfg.B) * t_d + rate(g2, cfg.tau_2p, cfg.B) * t_c + rate(g3, cfg.tau_3p, cfg.B / 2) * t_u
        out.append(received / (t_d + t_c + t_u))
    return out


def _perfect_csi_channel(beta_fl, beta_nfl):
    beta_fl = np.asarray(beta_fl, dtype=float)
    beta_nfl = np.asarray(beta_nfl, dtype=float)
    return ChannelState(
        beta_fl=beta_fl,
        beta_nfl=beta_nfl,
        sigma2_d=beta_fl,
        sigma2_u=beta_fl,
        sigma2_1=beta_nfl,
        sigma2_2=beta_nfl,
        sigma2_3=beta_nfl,
        positions=np.zeros((0, 2)),
    )


class SinrTests(unittest.TestCase):
    def setUp(self):
        self.cfg = with_overrides(SystemConfig(), M=20)
        self.ch = sample_layout(self.cfg, 3)
        self.a = _random_allocation(np.random.default_rng(3), self.cfg)

    def test_zero_power_gives_zero_sinr(self):
        a = Allocation(
            eta_d=np.zeros(5), zeta_1=np.zeros(5), zeta_2=np.zeros(5), eta_u=np.zeros(5), zeta_3=np.zeros(5), f=1e9
        )
        for sinr in (rates.sinr_s1_fl, rates.sinr_s1_nfl, rates.sinr_s2, rates.sinr_s3_ul, rates.sinr_s3_dl):
            self.assertEqual(sinr(a, self.ch, self.cfg, 0).value, 0.0)

    def test_single_fl_user_with_perfect_csi(self):
        cfg = SystemConfig(M=64, L=1, K=0)
        ch = _perfect_csi_channel([2e-12], [])
        a = Allocation(eta_d=[1.0], zeta_1=[], zeta_2=[], eta_u=[1.0], zeta_3=[], f=1e9)
        self.assertAlmostEqual(rates.sinr_s1_fl(a, ch, cfg, 0).value / (cfg.rho_d * 63 * 2e-12), 1.0, places=12)
        self.assertAlmostEqual(rates.sinr_s3_ul(a, ch, cfg, 0).value / (cfg.rho_u * 63 * 2e-12), 1.0, places=12)

    def test_single_non_fl_user_with_perfect_csi(self):
        cfg = SystemConfig(M=64, L=0, K=1)
        ch = _perfect_csi_channel([], [3e-12])
        a = Allocation(eta_d=[], zeta_1=[1.0], zeta_2=[1.0], eta_u=[], zeta_3=[1.0], f=1e9)
        expected = cfg.rho_d * 63 * 3e-12
        for sinr in (rates.sinr_s1_nfl, rates.sinr_s2, rates.sinr_s3_dl):
            self.assertAlmostEqual(sinr(a, ch, cfg, 0).value / expected, 1.0, places=12)

    def test_sinr_parts_match_vectorized_parts(self):
        numerator, denominator = rates.s2_parts(self.a, self.ch, self.cfg)
        parts = rates.sinr_s2(self.a, self.ch, self.cfg, 2)
        self.assertEqual(parts.numerator, numerator[2])
        self.assertEqual(parts.denominator, denominator[2])

    def test_silencing_the_other_users_never_lowers_a_sinr(self):
        cfg = with_overrides(SystemConfig(), M=30, L=3, K=4)
        rng = np.random.default_rng(11)

        def only(values, keep):
            out = np.zeros_like(values)
            out[keep] = values[keep]
            return out

        for seed in range(20):
            ch = sample_layout(cfg, seed)
            a = _random_allocation(rng, cfg)
            for l in range(cfg.L):
                alone = Allocation(only(a.eta_d, l), np.zeros(cfg.K), a.zeta_2, only(a.eta_u, l), a.zeta_3, a.f)
                self.assertGreaterEqual(
                    rates.sinr_s1_fl(alone, ch, cfg, l).value, rates.sinr_s1_fl(a, ch, cfg, l).value
                )
                self.assertGreaterEqual(
                    rates.sinr_s3_ul(alone, ch, cfg, l).value, rates.sinr_s3_ul(a, ch, cfg, l).value
                )
            for k in range(cfg.K):
                alone = Allocation(
                    np.zeros(cfg.L), only(a.zeta_1, k), only(a.zeta_2, k), a.eta_u, only(a.zeta_3, k), a.f
                )
                for sinr in (rates.sinr_s1_nfl, rates.sinr_s2, rates.sinr_s3_dl):
                    self.assertGreaterEqual(sinr(alone, ch, cfg, k).value, sinr(a, ch, cfg, k).value, msg=sinr.__name__)

    def test_out_of_range_index_is_rejected(self):
        with self.assertRaises(IndexError):
            rates.sinr_s1_fl(self.a, self.ch, self.cfg, 5)

    def test_mismatched_allocation_is_rejected(self):
        a = Allocation(eta_d=[0.1], zeta_1=[0.1], zeta_2=[0.1], eta_u=[0.1], zeta_3=[0.1], f=1e9)
        with self.assertRaisesRegex(ValueError, "eta_d must have length 5."):
            rates.evaluate(a, self.ch, self.cfg)


class RateTests(unittest.TestCase):
    def test_rate_from_sinr_examples(self):
        cfg = SystemConfig()
        self.assertEqual(rates.rate_from_sinr(0.0, 20, cfg), 0.0)
        self.assertAlmostEqual(rates.rate_from_sinr(1.0, 20, cfg), 18e6, delta=1e-6)
        self.assertAlmostEqual(rates.rate_from_sinr(1.0, 20, cfg, half_band=True), 9e6, delta=1e-6)

    def test_rate_from_sinr_rejects_negative_sinr(self):
        with self.assertRaises(ValueError):
            rates.rate_from_sinr(-0.1, 20, SystemConfig())

    def test_phase_delays(self):
        cfg = SystemConfig()
        delays = rates._times(
            rates.PhaseRates(np.array([18e6, 20e6]), np.zeros(1), np.zeros(1), np.array([16e6]), np.zeros(1)), 5e9, cfg
        )
        self.assertAlmostEqual(delays[0], 16e6 / 18e6, places=12)
        self.assertAlmostEqual(delays[1], 0.0128, places=12)
        self.assertAlmostEqual(delays[2], 1.0, places=12)

    def test_zero_group_rate_gives_unbounded_delay(self):
        cfg = SystemConfig()
        ch = sample_layout(cfg, 0)
        a = Allocation(
            eta_d=[0.0, 0.1, 0.1, 0.1, 0.1], zeta_1=np.full(5, 0.1), zeta_2=np.full(5, 0.2),
            eta_u=np.ones(5), zeta_3=np.full(5, 0.2), f=5e9,
        )
        self.assertTrue(math.isinf(rates.phase_times(a, ch, cfg)[0]))
        self.assertEqual(rates.evaluate(a, ch, cfg).min_eff_rate, 0.0)
        self.assertIn("qos_deadline", [v.constraint for v in rates.check_feasibility(a, ch, cfg)])

    def test_zero_non_fl_power_gives_zero_objective(self):
        cfg = SystemConfig()
        ch = sample_layout(cfg, 0)
        a = Allocation(
            eta_d=np.full(5, 0.2), zeta_1=np.zeros(5), zeta_2=np.zeros(5),
            eta_u=np.ones(5), zeta_3=np.zeros(5), f=5e9,
        )
        report = rates.evaluate(a, ch, cfg)
        self.assertEqual(report.min_eff_rate, 0.0)
        self.assertTrue(np.all(report.eff_rate == 0.0))

    def test_evaluate_matches_independent_loop_evaluation(self):
        cfg = with_overrides(SystemConfig(), M=20)
        rng = np.random.default_rng(7)
        for seed in range(5):
            ch = sample_layout(cfg, seed)
            a = _random_allocation(rng, cfg)
            report = rates.evaluate(a, ch, cfg)
            expected = _reference_eff_rates(a, ch, cfg)
            for got, want in zip(report.eff_rate, expected):
                self.assertAlmostEqual(got / want, 1.0, delta=1e-12)
            self.assertAlmostEqual(report.min_eff_rate / min(expected), 1.0, delta=1e-12)

    def test_evaluate_matches_grid_objective_on_small_instance(self):
        cfg = with_overrides(SystemConfig(), L=1, K=1, M=16, t_qos=1e4)
        rng = np.random.default_rng(8)
        for seed in range(5):
            ch = sample_layout(cfg, seed)
            a = _random_allocation(rng, cfg)
            point = np.concatenate([a.eta_d, a.zeta_1, a.zeta_2, a.eta_u, a.zeta_3, [a.f]])
            grid_value = oracle.grid_objective(point[None, :], ch, cfg)[0]
            self.assertAlmostEqual(grid_value / rates.evaluate(a, ch, cfg).min_eff_rate, 1.0, delta=1e-12)

    def test_effective_rate_is_a_duration_weighted_average(self):
        cfg = SystemConfig()
        ch = sample_layout(cfg, 4)
        report = rates.evaluate(_random_allocation(np.random.default_rng(4), cfg), ch, cfg)
        low = np.minimum(np.minimum(report.r_1, report.r_2), report.r_3)
        high = np.maximum(np.maximum(report.r_1, report.r_2), report.r_3)
        self.assertTrue(np.all(report.eff_rate >= low * (1 - 1e-12)))
        self.assertTrue(np.all(report.eff_rate <= high * (1 + 1e-12)))
        self.assertAlmostEqual(report.round_time, report.t_d + report.t_c + report.t_u)

    def test_phase_rates_grow_with_antennas(self):
        rng = np.random.default_rng(5)
        base = SystemConfig()
        a = _random_allocation(rng, base)
        previous = None
        for M in (20, 40, 60, 80, 100):
            cfg = with_overrides(base, M=M)
            current = rates.phase_rates(a, sample_layout(cfg, 9), cfg)
            if previous is not None:
                for before, after in zip(previous, current):
                    self.assertTrue(np.all(after > before))
            previous = current

    def test_permuting_non_fl_users_permutes_their_rates(self):
        cfg = SystemConfig()
        ch = sample_layout(cfg, 6)
        a = _random_allocation(np.random.default_rng(6), cfg)
        order = np.array([3, 0, 4, 1, 2])
        swapped_ch = ChannelState(
            beta_fl=ch.beta_fl, beta_nfl=ch.beta_nfl[order], sigma2_d=ch.sigma2_d, sigma2_u=ch.sigma2_u,
            sigma2_1=ch.sigma2_1[order], sigma2_2=ch.sigma2_2[order], sigma2_3=ch.sigma2_3[order],
            positions=ch.positions,
        )
        swapped_a = Allocation(
            eta_d=a.eta_d, zeta_1=a.zeta_1[order], zeta_2=a.zeta_2[order],
            eta_u=a.eta_u, zeta_3=a.zeta_3[order], f=a.f,
        )
        original = rates.evaluate(a, ch, cfg)
        swapped = rates.evaluate(swapped_a, swapped_ch, cfg)
        np.testing.assert_allclose(swapped.eff_rate, original.eff_rate[order], rtol=1e-12)
        self.assertAlmostEqual(swapped.min_eff_rate / original.min_eff_rate, 1.0, delta=1e-12)


class FeasibilityTests(unittest.TestCase):
    def setUp(self):
        self.cfg = with_overrides(SystemConfig(), t_qos=1e3)
        self.ch = sample_layout(self.cfg, 1)
        self.bl = bl_allocation(self.ch, self.cfg)

    def test_baseline_with_generous_deadline_is_feasible(self):
        self.assertEqual(rates.check_feasibility(self.bl, self.ch, self.cfg), [])

    def test_overspent_downlink_budget_is_reported_once(self):
        eta_d = np.array(self.bl.eta_d)
        eta_d[0] += 1e-3
        a = Allocation(eta_d, self.bl.zeta_1, self.bl.zeta_2, self.bl.eta_u, self.bl.zeta_3, self.bl.f)
        violations = rates.check_feasibility(a, self.ch, self.cfg)
        self.assertEqual([v.constraint for v in violations], ["power_s1"])
        self.assertAlmostEqual(violations[0].residual, 1e-3, places=12)

    def test_frequency_above_cap_is_reported(self):
        a = Allocation(self.bl.eta_d, self.bl.zeta_1, self.bl.zeta_2, self.bl.eta_u, self.bl.zeta_3, 2 * self.cfg.f_max)
        tags = [v.constraint for v in rates.check_feasibility(a, self.ch, self.cfg)]
        self.assertIn("freq_max", tags)

    def test_negative_power_is_reported(self):
        zeta_2 = np.array(self.bl.zeta_2)
        zeta_2[1] = -0.1
        a = Allocation(self.bl.eta_d, self.bl.zeta_1, zeta_2, self.bl.eta_u, self.bl.zeta_3, self.bl.f)
        tags = [v.constraint for v in rates.check_feasibility(a, self.ch, self.cfg)]
        self.assertIn("nonneg:zeta_2[1]", tags)

    def test_report_row_follows_report_columns(self):
        report = rates.evaluate(self.bl, self.ch, self.cfg)
        row = rates.report_row(report)
        self.assertEqual(set(row), set(rates.report_columns(5, 5)))
        self.assertEqual(row["min_eff_rate"], report.min_eff_rate)


if __name__ == "__main__":
    unittest.main()
