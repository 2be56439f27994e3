#!/usr/bin/env python3
import math
import sys
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import special_ortho_group

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.estimator import (
    BRUTE_FORCE_LIMIT,
    LOGLOG_SENTINEL,
    STATUS_GREATER_THAN,
    STATUS_OK,
    STATUS_UNDEFINED,
    LogLogCurve,
    central_slope,
    count_pairs,
    default_eps_grid,
    diameter_bound,
    dim_corr,
    dim_gp,
    loglog_points,
    nth_smallest_pair_distance,
    pair_count_curve,
    reach_free_test,
    round_half_up,
    slope_from_counts,
)
from src.geometry import ScalePair
from src.planner import heuristic_plan
from src.point_cloud import PointCloud

TWO_PI = 2.0 * math.pi


def _brute_count(cloud: PointCloud, eps: float) -> int:
    sq = cloud.pairwise_sq_distances()
    return int(np.count_nonzero((sq > 0) & (sq <= eps * eps)))


class TestPairCounting(unittest.TestCase):
    def test_matches_brute_force_on_random_clouds(self):
        rng = np.random.default_rng(2024)
        for trial in range(200):
            n = int(rng.integers(2, 160))
            dim = int(rng.integers(1, 5))
            coords = rng.uniform(0.0, 3.0, (n, dim))
            periods = np.full(dim, 3.0) if trial % 3 == 0 else None
            cloud = PointCloud(coords, periods)
            eps = float(rng.uniform(0.05, 1.5))
            with self.subTest(trial=trial, n=n, dim=dim):
                self.assertEqual(count_pairs(cloud, eps).count, _brute_count(cloud, eps))

    def test_boundary_is_inclusive_and_duplicates_excluded(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [1.0], [3.0]]))
        # distances: 1, 1, 3, 0 (duplicate), 2, 2
        self.assertEqual(count_pairs(cloud, 1.0).count, 2)
        self.assertEqual(count_pairs(cloud, 2.0).count, 4)

    def test_large_cloud_with_duplicates(self):
        base = np.linspace(0.0, 10.0, BRUTE_FORCE_LIMIT)
        cloud = PointCloud(np.concatenate((base, base[:5])))
        self.assertEqual(count_pairs(cloud, 0.5).count, _brute_count(cloud, 0.5))

    def test_curve_requires_increasing_scales(self):
        cloud = PointCloud(np.array([[0.0], [1.0]]))
        with self.assertRaises(ValueError):
            pair_count_curve(cloud, [1.0, 0.5])
        self.assertEqual([p.count for p in pair_count_curve(cloud, [0.5, 1.0])], [0, 1])

    def test_single_point(self):
        cloud = PointCloud(np.array([[0.0, 0.0]]))
        self.assertEqual(count_pairs(cloud, 10.0).count, 0)

    def test_nonpositive_eps(self):
        with self.assertRaises(ValueError):
            count_pairs(PointCloud(np.zeros((2, 1))), 0.0)


class TestTwoScaleEstimate(unittest.TestCase):
    def test_collinear_points(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [2.0]]))
        est = dim_corr(cloud, ScalePair(2.0, 1.0))
        self.assertEqual((est.count1, est.count2), (3, 2))
        self.assertAlmostEqual(est.raw_slope, math.log(1.5) / math.log(2.0))
        self.assertEqual(est.rounded, 1)
        self.assertEqual(est.status, STATUS_OK)
        self.assertEqual(est.describe(), "1")

    def test_no_pairs_at_small_scale(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [2.0]]))
        est = dim_corr(cloud, ScalePair(2.0, 0.5))
        self.assertEqual(est.status, STATUS_GREATER_THAN)
        self.assertFalse(est.defined)
        self.assertEqual(est.lower_bound, int(math.floor(math.log(3) / math.log(4.0))))
        self.assertIn("no pairs at eps2", est.describe())

    def test_no_pairs_at_large_scale(self):
        cloud = PointCloud(np.array([[0.0], [10.0]]))
        est = dim_corr(cloud, ScalePair(2.0, 1.0))
        self.assertEqual(est.status, STATUS_UNDEFINED)
        self.assertIsNone(est.rounded)

    def test_equal_counts_give_zero(self):
        est = slope_from_counts(5, 5, ScalePair(2.0, 1.0))
        self.assertEqual(est.raw_slope, 0.0)
        self.assertEqual(est.rounded, 0)

    def test_round_half_up(self):
        self.assertEqual(round_half_up(2.5), 3)
        self.assertEqual(round_half_up(1.4999), 1)
        self.assertEqual(round_half_up(-0.5), 0)

    def test_grid_points_in_the_plane(self):
        xs, ys = np.meshgrid(np.arange(40.0), np.arange(40.0))
        cloud = PointCloud(np.column_stack((xs.ravel(), ys.ravel())))
        est = dim_corr(cloud, ScalePair(8.0, 2.0))
        self.assertEqual(est.rounded, 2)

    def test_estimate_survives_rigid_motions(self):
        rng = np.random.default_rng(31)
        coords = rng.normal(size=(300, 3))
        s = ScalePair(0.9, 0.4)
        base = dim_corr(PointCloud(coords), s)
        for trial in range(5):
            rotation = special_ortho_group.rvs(3, random_state=trial)
            moved = coords @ rotation.T + rng.uniform(-10.0, 10.0, 3)
            with self.subTest(trial=trial):
                est = dim_corr(PointCloud(moved), s)
                self.assertEqual((est.count1, est.count2), (base.count1, base.count2))
                self.assertEqual(est.rounded, base.rounded)

    def test_estimate_survives_common_rescaling(self):
        coords = np.random.default_rng(32).uniform(0.0, 1.0, (250, 2))
        s = ScalePair(0.3, 0.1)
        base = dim_corr(PointCloud(coords), s)
        for factor in (0.25, 3.0, 40.0):
            with self.subTest(factor=factor):
                est = dim_corr(PointCloud(coords * factor), ScalePair(s.eps1 * factor, s.eps2 * factor))
                self.assertEqual((est.count1, est.count2), (base.count1, base.count2))

    def test_gp_estimate(self):
        cloud = PointCloud(np.array([[0.0], [0.5], [3.0]]))
        # one pair of three within 0.6
        self.assertAlmostEqual(dim_gp(cloud, 0.6), math.log(1.0 / 3.0) / math.log(0.6))
        with self.assertRaises(ValueError):
            dim_gp(cloud, 0.1)


class TestReachFree(unittest.TestCase):
    def test_nth_smallest_distance(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [3.0], [6.0]]))
        # distances 1, 2, 3, 3, 5, 6
        self.assertEqual(nth_smallest_pair_distance(cloud, 1), 1.0)
        self.assertEqual(nth_smallest_pair_distance(cloud, 3), 3.0)
        with self.assertRaises(ValueError):
            nth_smallest_pair_distance(cloud, 7)

    def test_large_cloud_uses_tree(self):
        rng = np.random.default_rng(8)
        cloud = PointCloud(rng.uniform(0.0, 1.0, (300, 2)))
        sq = np.sort(cloud.pairwise_sq_distances())
        self.assertAlmostEqual(nth_smallest_pair_distance(cloud, 50), math.sqrt(sq[49]), places=12)

    def test_circle_passes_dimension_one(self):
        t = np.random.default_rng(5).uniform(0.0, TWO_PI, 400)
        cloud = PointCloud(np.column_stack((np.cos(t), np.sin(t))))
        plan = heuristic_plan(1, 0.9)
        result = reach_free_test(cloud, 1, plan)
        self.assertGreaterEqual(result.estimate.count1, plan.N_pairs)
        self.assertAlmostEqual(result.r, plan.scales.ratio * result.R)
        self.assertEqual(result.passed, result.estimate.rounded == 1)

    def test_plan_dimension_must_match(self):
        cloud = PointCloud(np.random.default_rng(1).normal(size=(50, 2)))
        with self.assertRaises(ValueError):
            reach_free_test(cloud, 2, heuristic_plan(3))

    def test_too_few_points(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [2.0]]))
        with self.assertRaises(ValueError) as ctx:
            reach_free_test(cloud, 2, heuristic_plan(2))
        self.assertIn("cannot test d", str(ctx.exception))


class TestLogLog(unittest.TestCase):
    def test_plateau_and_monotone(self):
        rng = np.random.default_rng(9)
        cloud = PointCloud(rng.uniform(0.0, 1.0, (200, 2)))
        curve = loglog_points(cloud)
        defined = curve.log_count[curve.log_count != LOGLOG_SENTINEL]
        self.assertTrue(np.all(np.diff(defined) >= 0))
        self.assertAlmostEqual(curve.log_count[-1], math.log(200 * 199 / 2))
        self.assertAlmostEqual(curve.plateau, math.log(200 * 199 / 2))

    def test_sentinel_below_smallest_distance(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [3.0]]))
        curve = loglog_points(cloud, [0.1, 0.5, 1.0, 5.0])
        np.testing.assert_allclose(curve.log_count, [-1.0, -1.0, 0.0, math.log(3.0)])
        self.assertEqual(len(curve.rows()), 4)

    def test_grid_top_counts_every_pair_in_large_cloud(self):
        rng = np.random.default_rng(20)
        coords = rng.uniform(0.0, 1.0, (20000, 2))
        coords[1] = [6.0, 6.0]
        coords[2] = [-5.0, -4.0]
        cloud = PointCloud(coords)
        self.assertAlmostEqual(diameter_bound(cloud), math.hypot(11.0, 10.0), places=9)
        grid = default_eps_grid(cloud)
        self.assertEqual(count_pairs(cloud, grid[-1]).count, 20000 * 19999 // 2)

    def test_hull_diameter_matches_all_pairs(self):
        coords = np.random.default_rng(21).normal(size=(1500, 3))
        self.assertAlmostEqual(diameter_bound(PointCloud(coords)), float(pdist(coords).max()), places=12)
        line = np.random.default_rng(22).uniform(-2.0, 5.0, (900, 1))
        self.assertAlmostEqual(diameter_bound(PointCloud(line)), float(np.ptp(line)), places=12)

    def test_blocked_diameter_in_higher_dimension(self):
        coords = np.random.default_rng(23).normal(size=(600, 6))
        with patch("src.estimator.DISTANCE_SAMPLE_LIMIT", 100), patch("src.estimator.DIAMETER_BLOCK", 64):
            found = diameter_bound(PointCloud(coords))
        self.assertAlmostEqual(found, float(pdist(coords).max()), places=12)

    def test_torus_diameter_bound(self):
        coords = np.random.default_rng(24).uniform(0.0, TWO_PI, (500, 2))
        cloud = PointCloud(coords, np.full(2, TWO_PI))
        exact = diameter_bound(cloud)
        self.assertLessEqual(exact, math.sqrt(2.0) * math.pi + 1e-12)
        with patch("src.estimator.DISTANCE_SAMPLE_LIMIT", 100):
            bound = diameter_bound(cloud)
            grid = default_eps_grid(cloud)
        self.assertAlmostEqual(bound, math.sqrt(2.0) * math.pi, places=12)
        self.assertGreaterEqual(bound, exact)
        self.assertEqual(count_pairs(cloud, grid[-1]).count, 500 * 499 // 2)

    def test_central_slope_of_a_line(self):
        log_eps = np.linspace(-5.0, 2.0, 60)
        log_count = np.clip(3.0 * log_eps + 8.0, LOGLOG_SENTINEL, 10.0)
        n = int(round((1.0 + math.sqrt(1.0 + 8.0 * math.exp(10.0))) / 2.0))
        curve = LogLogCurve(log_eps=log_eps, log_count=log_count, n=n)
        self.assertAlmostEqual(central_slope(curve), 3.0, places=6)


if __name__ == "__main__":
    unittest.main()
