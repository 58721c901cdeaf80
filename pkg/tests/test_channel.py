"""
Unit tests for the uplink channel model

Author: Edgar McOchieng
"""

import math
import unittest
from unittest.mock import Mock, patch

import numpy as np
import pytest
from scipy import integrate

from src import channel
from src.channel import (
    ChannelParams,
    SuccessProbabilityCache,
    conditional_success_probability,
    db_to_linear,
    dbm_to_watts,
    debias_weight,
    draw_sinr,
    interference_exponent,
    laplace_interference,
    linear_to_db,
    monte_carlo_success_probability,
    ppp_extent,
    success_probability,
)
from src.errors import ChannelDomainError, QuadratureError, UnreachableClientError
from src.geometry import NetworkTopology
from tests.factories import DEFAULT_PARAMS, single_cell_topology


def unit_gain_rng() -> Mock:
    """Generator stand-in whose fading gains are all exactly one"""
    rng = Mock()
    rng.exponential.side_effect = lambda scale, size: np.ones(size)
    return rng


def brute_force_exponent(s: float, params: ChannelParams, n_points: int = 10_000_000, chunks: int = 20) -> float:
    """
    -log L(s) by trapezoid over distance on a log grid

    2 pi lambda * integral (1 - exp(-pi lambda r^2)) r / (1 + r^eta / (s P)) dr,
    with the far tail (where the integrand is s P r^(1-eta)) added in closed form.
    """
    lam, eta = params.bs_density, params.path_loss_exponent
    sp = s * params.tx_power
    lower = math.sqrt(1e-10 / (math.pi * lam))
    upper = max(math.sqrt(100.0 / (math.pi * lam)), (1e9 * sp) ** (1.0 / eta))
    edges = np.linspace(0, n_points - 1, chunks + 1).astype(int)
    log_lo, log_hi = math.log(lower), math.log(upper)
    step = (log_hi - log_lo) / (n_points - 1)

    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = np.exp(log_lo + step * np.arange(lo, hi + 1))
        f = 2 * math.pi * lam * -np.expm1(-math.pi * lam * r ** 2) * r / (1.0 + r ** eta / sp)
        total += integrate.trapezoid(f, r)
    tail = 2 * math.pi * lam * sp * upper ** (2 - eta) / (eta - 2)
    return total + tail


@pytest.mark.unit
class TestUnits(unittest.TestCase):
    """Test unit conversions"""

    def test_conversions(self):
        """Test dBm and dB helpers"""
        self.assertAlmostEqual(dbm_to_watts(10.0), 0.01)
        self.assertAlmostEqual(dbm_to_watts(-100.0), 1e-13)
        self.assertAlmostEqual(db_to_linear(10.0), 10.0)
        self.assertAlmostEqual(db_to_linear(0.0), 1.0)
        self.assertAlmostEqual(linear_to_db(100.0), 20.0)
        self.assertEqual(linear_to_db(0.0), -math.inf)
        with self.assertRaises(ChannelDomainError):
            linear_to_db(-1.0)

    def test_params_from_dbm(self):
        """Test config units map to linear parameters"""
        self.assertAlmostEqual(DEFAULT_PARAMS.tx_power, 0.01)
        self.assertAlmostEqual(DEFAULT_PARAMS.bs_density, 5e-5)
        self.assertEqual(ChannelParams.from_dbm(10.0, None, 4.0, 50.0).noise_power, 0.0)

    def test_invalid_params(self):
        """Test non-physical parameters are rejected"""
        with self.assertRaises(ChannelDomainError):
            ChannelParams(tx_power=0.01, noise_power=0.0, path_loss_exponent=2.0, bs_density=1e-5)
        with self.assertRaises(ChannelDomainError):
            ChannelParams(tx_power=-1.0, noise_power=0.0, path_loss_exponent=4.0, bs_density=1e-5)


@pytest.mark.unit
class TestLaplaceTransform(unittest.TestCase):
    """Test the interference Laplace transform"""

    def test_zero_argument(self):
        """Test L(0) = 1"""
        self.assertEqual(laplace_interference(0.0, DEFAULT_PARAMS), 1.0)

    def test_in_unit_interval_and_decreasing(self):
        """Test L(s) falls within (0, 1] and decreases in s"""
        values = [laplace_interference(s, DEFAULT_PARAMS) for s in (1e6, 1e8, 1e10, 1e12)]
        for v in values:
            self.assertTrue(0.0 < v <= 1.0)
        self.assertTrue(all(b < a for a, b in zip(values, values[1:])))

    def test_negative_argument(self):
        """Test s < 0 is a domain error"""
        with self.assertRaises(ChannelDomainError):
            laplace_interference(-1.0, DEFAULT_PARAMS)

    def test_non_increasing_in_density(self):
        """Test denser base stations never raise L(s)"""
        values = [laplace_interference(1e9, ChannelParams.from_dbm(10.0, -100.0, 4.0, density))
                  for density in (0.0, 1.0, 10.0, 50.0, 200.0)]
        self.assertEqual(values[0], 1.0)
        self.assertTrue(all(b <= a for a, b in zip(values, values[1:])))
        self.assertLess(values[-1], values[1])

    def test_no_base_stations(self):
        """Test a zero density removes all interference"""
        params = ChannelParams(tx_power=0.01, noise_power=1e-13, path_loss_exponent=4.0, bs_density=0.0)
        self.assertEqual(interference_exponent(1e9, params), 0.0)

    def test_quadrature_failure_raises(self):
        """Test a quadrature warning surfaces as QuadratureError"""
        channel._interference_exponent.cache_clear()
        with patch("src.channel.integrate.quad", side_effect=integrate.IntegrationWarning("roundoff")):
            with self.assertRaises(QuadratureError):
                laplace_interference(123456789.0, DEFAULT_PARAMS)
        channel._interference_exponent.cache_clear()

    @pytest.mark.slow
    def test_matches_brute_force_trapezoid(self):
        """Test adaptive quadrature against a 10^7-point trapezoid on random parameters"""
        rng = np.random.default_rng(2024)
        for _ in range(10):
            eta = rng.uniform(3.0, 5.0)
            params = ChannelParams(
                tx_power=10 ** rng.uniform(-3, 0),
                noise_power=0.0,
                path_loss_exponent=eta,
                bs_density=10 ** rng.uniform(-6, -4),
            )
            zeta = 10 ** rng.uniform(-1, 1.5)
            r = 10 ** rng.uniform(1.3, 2.7)
            s = zeta * r ** eta / params.tx_power

            expected = math.exp(-brute_force_exponent(s, params))
            self.assertAlmostEqual(laplace_interference(s, params), expected, places=6,
                                   msg=f"s={s:.4g} P={params.tx_power:.3g} lambda={params.bs_density:.3g} eta={eta:.3f}")


@pytest.mark.unit
class TestSuccessProbability(unittest.TestCase):
    """Test the closed-form success probability"""

    def test_zero_threshold(self):
        """Test zeta = 0 always decodes"""
        self.assertEqual(success_probability(0.0, 250.0, DEFAULT_PARAMS), 1.0)

    def test_noise_limited_when_no_base_stations(self):
        """Test lambda = 0 reduces to exp(-zeta N0 r^eta / P)"""
        params = ChannelParams(tx_power=0.01, noise_power=1e-13, path_loss_exponent=4.0, bs_density=0.0)
        for zeta in (0.5, 1.0, 10.0):
            for r in (50.0, 200.0, 800.0):
                expected = math.exp(-zeta * 1e-13 * r ** 4 / 0.01)
                self.assertAlmostEqual(success_probability(zeta, r, params), expected, delta=1e-9)

    def test_monotone_in_threshold_and_distance(self):
        """Test S decreases as zeta or r grows"""
        by_zeta = [success_probability(z, 100.0, DEFAULT_PARAMS) for z in (0.5, 1.0, 3.0, 10.0)]
        by_r = [success_probability(1.0, r, DEFAULT_PARAMS) for r in (25.0, 50.0, 100.0, 200.0)]
        self.assertTrue(all(b < a for a, b in zip(by_zeta, by_zeta[1:])))
        self.assertTrue(all(b < a for a, b in zip(by_r, by_r[1:])))

    def test_domain_errors(self):
        """Test r <= 0 and zeta < 0 are rejected"""
        with self.assertRaises(ChannelDomainError):
            success_probability(1.0, 0.0, DEFAULT_PARAMS)
        with self.assertRaises(ChannelDomainError):
            success_probability(-0.1, 100.0, DEFAULT_PARAMS)

    def test_debias_weight(self):
        """Test the weight is 1/S and unreachable clients raise"""
        s = success_probability(1.0, 100.0, DEFAULT_PARAMS)
        self.assertAlmostEqual(debias_weight(1.0, 100.0, DEFAULT_PARAMS), 1.0 / s)
        self.assertGreaterEqual(debias_weight(0.0, 100.0, DEFAULT_PARAMS), 1.0)
        with self.assertRaises(UnreachableClientError):
            debias_weight(31.6, 5000.0, DEFAULT_PARAMS)

    def test_debias_weight_grows_with_distance(self):
        """Test 1/S strictly increases with r at every threshold on a grid"""
        distances = (20.0, 40.0, 60.0, 90.0, 130.0, 180.0)
        for zeta in (0.5, 1.0, 3.0, 10.0):
            weights = [debias_weight(zeta, r, DEFAULT_PARAMS, floor=0.0) for r in distances]
            self.assertTrue(all(b > a for a, b in zip(weights, weights[1:])), f"zeta={zeta}")

    def test_conditional_probability(self):
        """Test the topology-conditioned probability formula"""
        r, zeta = 100.0, 2.0
        noise = math.exp(-zeta * DEFAULT_PARAMS.noise_power * r ** 4 / DEFAULT_PARAMS.tx_power)
        self.assertAlmostEqual(conditional_success_probability(zeta, r, [], DEFAULT_PARAMS), noise)
        expected = noise / (1 + zeta * (r / 200.0) ** 4) / (1 + zeta * (r / 400.0) ** 4)
        self.assertAlmostEqual(conditional_success_probability(zeta, r, [200.0, 400.0], DEFAULT_PARAMS), expected)

    def test_cache_memoizes(self):
        """Test repeated lookups hit the cache"""
        cache = SuccessProbabilityCache(DEFAULT_PARAMS)
        first = cache.probability(1.0, 120.0)
        second = cache.probability(1.0, 120.0)
        self.assertEqual(first, second)
        self.assertEqual(cache.stats, {"hits": 1, "misses": 1})
        self.assertAlmostEqual(cache.weight(first), 1.0 / first)


@pytest.mark.unit
class TestDrawSinr(unittest.TestCase):
    """Test per-round SINR realizations"""

    def test_noise_only_with_unit_gains(self):
        """Test SINR = P r^-eta / N0 in a single cell with unit fading"""
        topology = single_cell_topology(distances=(30.0, 60.0))
        realization = draw_sinr(topology, DEFAULT_PARAMS, unit_gain_rng(), zeta=1.0)
        expected = 0.01 * np.array([30.0, 60.0]) ** -4 / 1e-13
        np.testing.assert_allclose(realization.sinr, expected)
        self.assertTrue(np.all(realization.success))

    def test_same_rb_interferer_with_unit_gains(self):
        """Test an other-cell user on the same RB adds P d^-eta"""
        topology = NetworkTopology.from_points(
            bs_positions=[[0.0, 0.0], [300.0, 0.0]],
            user_positions=[[50.0, 0.0], [0.0, 40.0], [250.0, 0.0], [300.0, 60.0]],
            rb_assignment=[0, 1, 0, 2],
            n_rb=3,
        )
        realization = draw_sinr(topology, DEFAULT_PARAMS, unit_gain_rng(), zeta=1.0)
        np.testing.assert_array_equal(realization.users, [0, 1])
        interference = 0.01 * 250.0 ** -4
        np.testing.assert_allclose(realization.sinr[0], 0.01 * 50.0 ** -4 / (1e-13 + interference))
        np.testing.assert_allclose(realization.sinr[1], 0.01 * 40.0 ** -4 / 1e-13)

    def test_noiseless_without_interference_is_infinite(self):
        """Test a zero denominator gives infinite SINR"""
        params = ChannelParams(tx_power=0.01, noise_power=0.0, path_loss_exponent=4.0, bs_density=5e-5)
        realization = draw_sinr(single_cell_topology(), params, np.random.default_rng(0), zeta=1e6)
        self.assertTrue(np.all(np.isinf(realization.sinr)))
        self.assertTrue(np.all(realization.success))

    def test_threshold_is_strict(self):
        """Test success requires SINR strictly above zeta"""
        topology = single_cell_topology(distances=(100.0,))
        sinr = DEFAULT_PARAMS.tx_power * 100.0 ** -4.0 / DEFAULT_PARAMS.noise_power
        self.assertFalse(draw_sinr(topology, DEFAULT_PARAMS, unit_gain_rng(), zeta=sinr).success[0])

    def test_unknown_interference_model(self):
        """Test an unknown interference model is rejected"""
        with self.assertRaises(ChannelDomainError):
            draw_sinr(single_cell_topology(), DEFAULT_PARAMS, np.random.default_rng(0), interference="fresh")

    def test_ppp_mode_draws(self):
        """Test ppp mode returns one draw per requested user"""
        topology = single_cell_topology(distances=(40.0, 80.0, 120.0))
        realization = draw_sinr(topology, DEFAULT_PARAMS, np.random.default_rng(1), zeta=1.0,
                                users=[0, 2], interference="ppp")
        np.testing.assert_array_equal(realization.users, [0, 2])
        self.assertEqual(len(realization.sinr), 2)


@pytest.mark.unit
class TestMonteCarloOracle(unittest.TestCase):
    """Test the sampled success probability"""

    def test_extent(self):
        """Test the interferer field is empty at zeta = 0 and positive otherwise"""
        self.assertEqual(ppp_extent(0.0, 100.0, DEFAULT_PARAMS), 0.0)
        self.assertGreaterEqual(ppp_extent(1.0, 100.0, DEFAULT_PARAMS), 1.0)

    def test_agrees_with_analytic(self):
        """Test a single cell of the audit grid"""
        analytic = success_probability(1.0, 100.0, DEFAULT_PARAMS)
        empirical = monte_carlo_success_probability(1.0, 100.0, DEFAULT_PARAMS, 20_000, np.random.default_rng(7))
        self.assertAlmostEqual(empirical, analytic, delta=0.02)


if __name__ == '__main__':
    unittest.main()
