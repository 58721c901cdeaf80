"""
Unit tests for network topology generation

Author: Edgar McOchieng
"""

import os
import shutil
import tempfile
import unittest

import numpy as np
import pytest

from src.errors import TopologyError
from src.geometry import (
    GeometryConfig,
    NetworkTopology,
    associate,
    generate_topology,
    load_topology,
    save_topology,
)


def small_geometry(**overrides) -> GeometryConfig:
    values = dict(bs_density=50e-6, area_side=1000.0, n_users_per_test_cell=10, n_rb=10, seed=1)
    values.update(overrides)
    return GeometryConfig(**values)


@pytest.mark.unit
class TestAssociate(unittest.TestCase):
    """Test nearest-BS association"""

    def test_matches_brute_force(self):
        """Test association agrees with an exhaustive search"""
        rng = np.random.default_rng(0)
        bs = rng.uniform(-500, 500, size=(40, 2))
        points = rng.uniform(-500, 500, size=(300, 2))

        association, distances = associate(points, bs)

        all_d = np.linalg.norm(points[:, None, :] - bs[None, :, :], axis=2)
        np.testing.assert_array_equal(association, np.argmin(all_d, axis=1))
        np.testing.assert_allclose(distances, all_d.min(axis=1))

    def test_ties_go_to_lowest_index(self):
        """Test a point equidistant from two BSs joins the lower index"""
        bs = np.array([[10.0, 0.0], [-10.0, 0.0], [100.0, 100.0]])
        association, distances = associate(np.array([[0.0, 0.0]]), bs)
        self.assertEqual(association[0], 0)
        self.assertAlmostEqual(distances[0], 10.0)

        association, _ = associate(np.array([[0.0, 0.0]]), bs[[1, 0, 2]])
        self.assertEqual(association[0], 0)

    def test_requires_a_base_station(self):
        """Test association without BSs fails"""
        with self.assertRaises(TopologyError):
            associate(np.zeros((1, 2)), np.zeros((0, 2)))


@pytest.mark.unit
class TestGenerateTopology(unittest.TestCase):
    """Test PPP layout generation"""

    def setUp(self):
        self.cfg = small_geometry()
        self.topology = generate_topology(self.cfg)

    def test_deterministic_per_seed(self):
        """Test the same seed reproduces the layout and another seed does not"""
        again = generate_topology(self.cfg)
        np.testing.assert_array_equal(again.bs_positions, self.topology.bs_positions)
        np.testing.assert_array_equal(again.user_positions, self.topology.user_positions)
        np.testing.assert_array_equal(again.rb_assignment, self.topology.rb_assignment)

        other = generate_topology(small_geometry(seed=2))
        self.assertFalse(np.array_equal(other.bs_positions, self.topology.bs_positions))

    def test_test_bs_at_origin(self):
        """Test coordinates are translated so the test BS sits at the origin"""
        np.testing.assert_allclose(self.topology.bs_positions[self.topology.test_bs], [0.0, 0.0])

    def test_test_cell_users_on_distinct_rbs(self):
        """Test the test cell holds exactly the configured users, each on its own RB"""
        users = self.topology.test_cell_users()
        self.assertEqual(len(users), self.cfg.n_users_per_test_cell)
        np.testing.assert_array_equal(users, np.arange(self.cfg.n_users_per_test_cell))
        rbs = self.topology.rb_assignment[users]
        self.assertEqual(len(set(rbs.tolist())), len(rbs))
        self.assertTrue(np.all((rbs >= 0) & (rbs < self.cfg.n_rb)))

    def test_one_user_per_rb_in_every_cell(self):
        """Test no cell reuses an RB and full activity fills every RB"""
        topology = self.topology
        for cell in range(topology.n_bs):
            members = np.flatnonzero(topology.association == cell)
            rbs = topology.rb_assignment[members].tolist()
            self.assertEqual(len(rbs), len(set(rbs)))
            if cell != topology.test_bs:
                self.assertEqual(len(rbs), self.cfg.n_rb)

    def test_association_is_nearest(self):
        """Test every user is served by its nearest BS and distances match"""
        topology = self.topology
        association, distances = associate(topology.user_positions, topology.bs_positions)
        np.testing.assert_array_equal(association, topology.association)
        np.testing.assert_allclose(distances, topology.distances)

    def test_users_inside_area(self):
        """Test users stay inside the translated simulation square"""
        xmin, xmax, ymin, ymax = self.topology.area_bounds
        pts = self.topology.user_positions
        self.assertTrue(np.all((pts[:, 0] >= xmin - 1e-9) & (pts[:, 0] <= xmax + 1e-9)))
        self.assertTrue(np.all((pts[:, 1] >= ymin - 1e-9) & (pts[:, 1] <= ymax + 1e-9)))

    def test_interferers_exclude_test_cell(self):
        """Test interferers on an RB are exactly the other-cell users on that RB"""
        topology = self.topology
        for rb in range(topology.n_rb):
            expected = np.sort(np.linalg.norm(
                topology.user_positions[(topology.association != topology.test_bs)
                                        & (topology.rb_assignment == rb)], axis=1))
            np.testing.assert_allclose(np.sort(topology.interferer_distances(rb)), expected)
        with self.assertRaises(TopologyError):
            topology.interferer_distances(topology.n_rb)

    def test_rb_activity_thins_interferers(self):
        """Test idle RBs leave other cells with fewer users"""
        sparse = generate_topology(small_geometry(rb_activity=0.0))
        self.assertEqual(sparse.n_users, self.cfg.n_users_per_test_cell)
        self.assertEqual(sum(len(sparse.interferer_distances(rb)) for rb in range(sparse.n_rb)), 0)

    def test_arrays_are_read_only(self):
        """Test the layout cannot be mutated"""
        with self.assertRaises(ValueError):
            self.topology.distances[0] = 1.0


@pytest.mark.unit
class TestTopologyEdgeCases(unittest.TestCase):
    """Test invalid and degenerate layouts"""

    def test_invalid_config(self):
        """Test more test-cell users than RBs is rejected"""
        with self.assertRaises(TopologyError):
            generate_topology(small_geometry(n_users_per_test_cell=11))
        with self.assertRaises(TopologyError):
            generate_topology(small_geometry(bs_density=0.0))

    def test_empty_ppp_fails_after_retries(self):
        """Test a vanishing density gives up with TopologyError"""
        with self.assertRaises(TopologyError):
            generate_topology(small_geometry(bs_density=1e-15))

    def test_single_bs_has_no_interferers(self):
        """Test a one-BS draw puts every user in the test cell"""
        for seed in range(200):
            topology = generate_topology(small_geometry(bs_density=1e-6, seed=seed))
            if topology.n_bs == 1:
                break
        else:
            self.fail("no single-BS layout found")
        self.assertEqual(topology.n_users, 10)
        for rb in range(topology.n_rb):
            self.assertEqual(len(topology.interferer_distances(rb)), 0)

    def test_hand_built_interferer_distance(self):
        """Test one other-cell user at (3000, 4000) is 5000 m from the test BS"""
        topology = NetworkTopology.from_points(
            bs_positions=[[0.0, 0.0], [3000.0, 4100.0]],
            user_positions=[[10.0, 0.0], [3000.0, 4000.0]],
            rb_assignment=[0, 0],
            n_rb=2,
        )
        self.assertEqual(topology.test_bs, 0)
        np.testing.assert_array_equal(topology.cell_user_counts(), [1, 1])
        np.testing.assert_allclose(topology.interferer_distances(0), [5000.0])
        self.assertEqual(len(topology.interferer_distances(1)), 0)


@pytest.mark.slow
class TestTopologyStatistics(unittest.TestCase):
    """Test layout invariants and the PPP count over many seeds"""

    SEEDS = 100

    def test_rb_uniqueness_and_bs_count_over_seeds(self):
        """Test per-cell RB uniqueness for 100 seeds and the mean BS count within 3 standard errors"""
        cfg = small_geometry()
        counts = []
        for seed in range(self.SEEDS):
            topology = generate_topology(small_geometry(seed=seed))
            counts.append(topology.n_bs)
            pairs = np.column_stack([topology.association, topology.rb_assignment])
            self.assertEqual(len(np.unique(pairs, axis=0)), topology.n_users, f"seed {seed}")
            per_cell = topology.cell_user_counts()
            self.assertLessEqual(int(per_cell.max()), cfg.n_rb)
            self.assertEqual(per_cell[topology.test_bs], cfg.n_users_per_test_cell)

        mean = cfg.bs_density * cfg.area_side ** 2
        standard_error = np.sqrt(mean / self.SEEDS)
        self.assertLess(abs(np.mean(counts) - mean), 3 * standard_error)

    def test_cell_sizes_at_default_density(self):
        """Test no cell holds more than 30 users at 50 BS/km^2 over 10 km x 10 km"""
        cfg = GeometryConfig(bs_density=50e-6, area_side=10_000.0, n_users_per_test_cell=30, n_rb=30, seed=0)
        topology = generate_topology(cfg)
        per_cell = topology.cell_user_counts()
        self.assertEqual(len(per_cell), topology.n_bs)
        self.assertLessEqual(int(per_cell.max()), 30)
        self.assertEqual(per_cell[topology.test_bs], 30)


@pytest.mark.unit
class TestTopologyPersistence(unittest.TestCase):
    """Test topology JSON files"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_save_and_load(self):
        """Test a saved layout loads back identical"""
        topology = generate_topology(small_geometry())
        path = save_topology(topology, os.path.join(self.temp_dir, "nested", "topology.json"))
        loaded = load_topology(path)

        self.assertEqual(loaded.test_bs, topology.test_bs)
        self.assertEqual(loaded.n_rb, topology.n_rb)
        np.testing.assert_array_equal(loaded.user_positions, topology.user_positions)
        np.testing.assert_array_equal(loaded.association, topology.association)
        np.testing.assert_array_equal(loaded.rb_assignment, topology.rb_assignment)

    def test_rejects_unknown_schema(self):
        """Test a wrong schema version is refused"""
        data = generate_topology(small_geometry()).to_dict()
        data["schema_version"] = 99
        with self.assertRaises(TopologyError):
            NetworkTopology.from_dict(data)


if __name__ == '__main__':
    unittest.main()
