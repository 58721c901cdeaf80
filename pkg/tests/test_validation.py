"""
Tests for the channel audit and the case comparison

Author: Edgar McOchieng
"""

import csv
import os
import shutil
import tempfile
import unittest

import pytest

from src.channel import ChannelParams
from src.errors import SimulationError
from src.orchestrator import ExperimentCase
from src.run_log import write_compare_csv
from src.validation import (
    AUDIT_COLUMNS,
    RoundPoint,
    points_from_compare_csv,
    rounds_to_reach,
    summarize_cases,
    validate_channel,
    write_channel_audit,
)
from tests.factories import DEFAULT_PARAMS, make_records


@pytest.mark.unit
class TestChannelAudit(unittest.TestCase):
    """Test the analytic versus Monte Carlo audit"""

    def setUp(self):
        """Set up test fixtures"""
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        """Clean up test fixtures"""
        shutil.rmtree(self.temp_dir)

    def test_no_base_stations_is_noise_limited(self):
        """Test the analytic column equals the noise-only formula when lambda = 0"""
        params = ChannelParams.from_dbm(10.0, -100.0, 4.0, 0.0)
        audit = validate_channel(params, zetas=(0.0, 1.0, 10.0), distances=(50.0, 100.0),
                                 n_samples=5000, tolerance=0.03)
        for cell in audit.cells:
            self.assertAlmostEqual(cell.s_analytic, cell.noise_limited, places=12)
        self.assertTrue(audit.passed)

    def test_fault_injection_fails(self):
        """Test scaling the analytic side by 1.1 makes the audit fail"""
        audit = validate_channel(DEFAULT_PARAMS, zetas=(0.0, 1.0), distances=(50.0, 100.0),
                                 n_samples=5000, fault_scale=1.1)
        self.assertFalse(audit.passed)
        self.assertGreaterEqual(audit.max_error, 0.1 - 1e-12)

    def test_deterministic(self):
        """Test the same seed gives the same empirical column"""
        kwargs = dict(zetas=(1.0,), distances=(100.0,), n_samples=2000, seed=5)
        first = validate_channel(DEFAULT_PARAMS, **kwargs)
        second = validate_channel(DEFAULT_PARAMS, **kwargs)
        self.assertEqual(first.cells[0].s_montecarlo, second.cells[0].s_montecarlo)

    def test_write_csv(self):
        """Test the audit table layout: dB threshold first, one row per cell"""
        audit = validate_channel(DEFAULT_PARAMS, zetas=(0.0, 1.0, 10.0), distances=(50.0,), n_samples=500,
                                 tolerance=0.2)
        path = write_channel_audit(audit, os.path.join(self.temp_dir, "audit", "channel.csv"))
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(AUDIT_COLUMNS[:5], ("zeta_db", "r", "S_analytic", "S_montecarlo", "abs_err"))
        self.assertEqual(tuple(rows[0].keys()), AUDIT_COLUMNS)
        self.assertEqual(len(rows), 3)
        self.assertEqual(rows[0]["zeta_db"], "-inf")
        self.assertAlmostEqual(float(rows[1]["zeta_db"]), 0.0)
        self.assertAlmostEqual(float(rows[2]["zeta_db"]), 10.0)
        for row in rows:
            self.assertEqual(float(row["r"]), 50.0)
            self.assertAlmostEqual(float(row["abs_err"]),
                                   abs(float(row["S_analytic"]) - float(row["S_montecarlo"])), places=12)
        self.assertEqual(float(rows[0]["S_analytic"]), 1.0)

    def test_needs_samples(self):
        """Test zero samples per cell is rejected"""
        with self.assertRaises(SimulationError):
            validate_channel(DEFAULT_PARAMS, n_samples=0)


@pytest.mark.slow
class TestFullChannelAudit(unittest.TestCase):
    """Test the default grid at full sample size"""

    def test_default_grid_passes(self):
        """Test all 25 cells agree within 0.01 at 10^5 samples"""
        audit = validate_channel(DEFAULT_PARAMS)
        self.assertEqual(len(audit.cells), 25)
        self.assertTrue(audit.passed, msg=f"max error {audit.max_error:.4f}")


def points(losses, switch_at=None):
    return [
        RoundPoint(t=t, mode="TrustedOnly" if switch_at is not None and t >= switch_at else "RiskAgnostic",
                   loss=loss, accuracy=1.0 - loss)
        for t, loss in enumerate(losses)
    ]


@pytest.mark.unit
class TestSummarizeCases(unittest.TestCase):
    """Test the reduction of three case logs"""

    def test_risk_aware_wins(self):
        """Test final losses, rounds to target and the switch round"""
        comparison = summarize_cases({
            ExperimentCase.RISK_AWARE: points([0.9, 0.6, 0.4, 0.3], switch_at=2),
            ExperimentCase.RISK_AGNOSTIC: points([0.9, 0.7, 0.6, 0.55]),
            ExperimentCase.CONSERVATIVE: points([0.9, 0.8, 0.6, 0.5]),
        })
        self.assertEqual(comparison.target_loss, 0.5)
        self.assertEqual(comparison.rounds_to_target,
                         {"A_RiskAware": 3, "B_RiskAgnostic": None, "C_Conservative": 4})
        self.assertEqual(comparison.switch_round, 2)
        self.assertTrue(comparison.risk_aware_beats_conservative)
        self.assertTrue(comparison.risk_aware_beats_agnostic)
        self.assertTrue(comparison.risk_aware_faster)
        self.assertAlmostEqual(comparison.final_accuracy["A_RiskAware"], 0.7)

    def test_risk_aware_loses(self):
        """Test the flags flip when the conservative case ends lower"""
        comparison = summarize_cases({
            ExperimentCase.RISK_AWARE: points([0.9, 0.8, 0.7]),
            ExperimentCase.CONSERVATIVE: points([0.5, 0.4, 0.3]),
        })
        self.assertFalse(comparison.risk_aware_beats_conservative)
        self.assertFalse(comparison.risk_aware_faster)
        self.assertIsNone(comparison.risk_aware_beats_agnostic)
        self.assertIsNone(comparison.switch_round)

    def test_missing_conservative_case(self):
        """Test comparisons needing Case C are None"""
        comparison = summarize_cases({ExperimentCase.RISK_AWARE: points([0.5])})
        self.assertIsNone(comparison.target_loss)
        self.assertEqual(comparison.rounds_to_target, {})
        self.assertIsNone(comparison.risk_aware_faster)

    def test_rounds_to_reach(self):
        """Test the count is one-based and None when never reached"""
        self.assertEqual(rounds_to_reach(points([0.4, 0.2]), 0.4), 1)
        self.assertIsNone(rounds_to_reach(points([0.4, 0.3]), 0.1))

    def test_from_compare_csv(self):
        """Test a written compare CSV loads back into comparable points"""
        temp_dir = tempfile.mkdtemp()
        try:
            path = os.path.join(temp_dir, "compare.csv")
            write_compare_csv({ExperimentCase.RISK_AWARE: make_records(3),
                               ExperimentCase.CONSERVATIVE: make_records(2)}, path)
            loaded = points_from_compare_csv(path)
            self.assertEqual(sorted(c.value for c in loaded), ["A_RiskAware", "C_Conservative"])
            self.assertEqual(summarize_cases(loaded).switch_round, 2)
        finally:
            shutil.rmtree(temp_dir)


if __name__ == '__main__':
    unittest.main()
