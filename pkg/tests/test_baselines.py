#!/usr/bin/env python3
import math
import sys
import unittest
from pathlib import Path

import numpy as np
from scipy import integrate, special
from scipy.stats import special_ortho_group

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.baselines import (
    anova_dimension,
    anova_required_angles,
    anova_statistic,
    beta_d,
    collect_angles,
    dimension_from_spectrum,
    expected_ktuples,
    local_pca_dimension,
    local_pca_neighborhoods,
    local_pca_spectrum,
    nearest_reference_dimension,
    pca_threshold_for,
)
from src.geometry import euclidean_ball_volume
from src.point_cloud import PointCloud

TORUS4_VOL = (2.0 * math.pi) ** 4


def _moment(d: float, power: int) -> float:
    m = d - 2.0
    num, _ = integrate.quad(lambda t: (t - math.pi / 2.0) ** power * math.sin(t) ** m, 0.0, math.pi)
    den, _ = integrate.quad(lambda t: math.sin(t) ** m, 0.0, math.pi)
    return num / den


class TestAngleMoments(unittest.TestCase):
    def test_closed_forms(self):
        self.assertAlmostEqual(beta_d(2), math.pi ** 2 / 12.0, delta=1e-9)
        self.assertAlmostEqual(beta_d(3), math.pi ** 2 / 4.0 - 2.0, delta=1e-9)
        self.assertAlmostEqual(beta_d(4), math.pi ** 2 / 12.0 - 0.5, delta=1e-9)

    def test_trigamma_identity(self):
        for d in range(2, 13):
            with self.subTest(d=d):
                self.assertAlmostEqual(beta_d(d), 0.5 * float(special.polygamma(1, d / 2.0)), delta=1e-9)

    def test_decreasing_in_dimension(self):
        values = [beta_d(d) for d in range(2, 12)]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))

    def test_below_two_is_rejected(self):
        with self.assertRaises(ValueError):
            beta_d(1)

    def test_required_angles_match_direct_quadrature(self):
        for d in (4, 5):
            beta = _moment(d, 2)
            sigma = math.sqrt(_moment(d, 4) - beta ** 2)
            gap = min(_moment(d - 0.5, 2) - beta, beta - _moment(d + 0.5, 2))
            expected = math.ceil((1.64 * sigma / gap) ** 2)
            with self.subTest(d=d):
                self.assertLessEqual(abs(anova_required_angles(d) - expected), 1)
        self.assertGreater(anova_required_angles(5), anova_required_angles(4))

    def test_four_dimensional_count_is_near_two_hundred(self):
        n = anova_required_angles(4)
        self.assertGreaterEqual(n, 200)
        self.assertLessEqual(n, 212)
        self.assertLess(n, 652)

    def test_required_angles_domain(self):
        with self.assertRaises(ValueError):
            anova_required_angles(1)


class TestAngles(unittest.TestCase):
    def test_equilateral_triangle(self):
        h = math.sqrt(3.0) / 2.0
        cloud = PointCloud(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, h]]))
        sample = collect_angles(cloud, 1.01)
        self.assertEqual(sample.triples, 1)
        np.testing.assert_allclose(sample.angles, [math.pi / 3.0] * 3, atol=1e-12)
        self.assertAlmostEqual(sample.statistic, (math.pi / 6.0) ** 2, places=12)

    def test_right_triangle(self):
        cloud = PointCloud(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        sample = collect_angles(cloud, 1.5)
        np.testing.assert_allclose(sorted(sample.angles), [math.pi / 4, math.pi / 4, math.pi / 2], atol=1e-12)

    def test_triples_need_all_three_pairs_close(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [2.0], [10.0]]))
        self.assertEqual(collect_angles(cloud, 1.0).triples, 0)
        self.assertEqual(collect_angles(cloud, 2.0).triples, 1)

    def test_angles_sum_to_pi(self):
        rng = np.random.default_rng(4)
        cloud = PointCloud(rng.uniform(0.0, 1.0, (40, 3)))
        sample = collect_angles(cloud, 0.4)
        sums = sample.angles.reshape(-1, 3).sum(axis=1)
        np.testing.assert_allclose(sums, math.pi, atol=1e-9)

    def test_periodic_triangle(self):
        periods = np.array([2.0 * math.pi, 2.0 * math.pi])
        cloud = PointCloud(np.array([[0.05, 0.0], [2.0 * math.pi - 0.05, 0.0], [0.0, 0.1]]), periods)
        sample = collect_angles(cloud, 0.2)
        self.assertEqual(sample.triples, 1)
        self.assertAlmostEqual(float(sample.angles.sum()), math.pi, places=9)

    def test_statistic_ignores_rotation_and_translation(self):
        rng = np.random.default_rng(17)
        coords = rng.uniform(0.0, 1.0, (60, 3))
        base, base_sample = anova_statistic(PointCloud(coords), 0.35)
        for trial in range(4):
            rotation = special_ortho_group.rvs(3, random_state=100 + trial)
            moved = coords @ rotation.T + rng.normal(scale=5.0, size=3)
            with self.subTest(trial=trial):
                statistic, sample = anova_statistic(PointCloud(moved), 0.35)
                self.assertEqual(sample.triples, base_sample.triples)
                self.assertAlmostEqual(statistic, base, places=9)

    def test_no_triples_is_an_error(self):
        cloud = PointCloud(np.array([[0.0], [5.0]]))
        with self.assertRaises(ValueError):
            anova_statistic(cloud, 1.0)

    def test_collinear_points_read_as_dimension_one(self):
        cloud = PointCloud(np.array([[0.0], [1.0], [2.0]]))
        self.assertEqual(anova_dimension(cloud, 2.0), 1)

    def test_nearest_reference(self):
        self.assertEqual(nearest_reference_dimension(beta_d(3)), 3)
        self.assertEqual(nearest_reference_dimension(math.pi ** 2 / 4.0), 1)
        self.assertEqual(nearest_reference_dimension(0.0), 12)
        self.assertEqual(nearest_reference_dimension(beta_d(6), (2, 4)), 4)
        with self.assertRaises(ValueError):
            nearest_reference_dimension(0.3, (3, 2))


class TestTuples(unittest.TestCase):
    def test_triples_on_four_torus(self):
        self.assertAlmostEqual(expected_ktuples(1958, 3, 4, 0.54, TORUS4_VOL), 91.0, delta=0.5)

    def test_six_tuples_on_four_torus(self):
        value = expected_ktuples(1958, 6, 4, 0.54, TORUS4_VOL)
        self.assertAlmostEqual(value, 0.110373, delta=0.01 * 0.110373)
        self.assertGreater(expected_ktuples(1958, 6, 4, 2.0, TORUS4_VOL), value)

    def test_pairs_formula(self):
        n, eps, vol = 500, 0.3, 40.0
        expected = n * (n - 1) / 2.0 * euclidean_ball_volume(3, eps) / vol
        self.assertAlmostEqual(expected_ktuples(n, 2, 3, eps, vol), expected, delta=1e-9 * expected)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            expected_ktuples(5, 1, 2, 0.1, 1.0)
        with self.assertRaises(ValueError):
            expected_ktuples(3, 4, 2, 0.1, 1.0)


class TestLocalPca(unittest.TestCase):
    def test_line_in_space(self):
        t = np.linspace(0.0, 1.0, 20)[:, np.newaxis]
        points = t * np.array([[1.0, 2.0, -1.0]])
        spectrum = local_pca_spectrum(points)
        self.assertEqual(len(spectrum), 3)
        self.assertEqual(list(spectrum[1:]), [0.0, 0.0])
        self.assertEqual(local_pca_dimension(points), 1)

    def test_plane_in_five_dimensions(self):
        rng = np.random.default_rng(12)
        basis = np.linalg.qr(rng.normal(size=(5, 2)))[0].T
        points = rng.uniform(-1.0, 1.0, (200, 2)) @ basis
        self.assertEqual(local_pca_dimension(points), 2)
        spectrum = local_pca_spectrum(points)
        self.assertTrue(np.all(spectrum[2:] <= 1e-10))

    def test_spectrum_ignores_rotation_and_scales_with_the_cloud(self):
        rng = np.random.default_rng(14)
        points = rng.normal(size=(40, 4)) * np.array([3.0, 1.5, 0.5, 0.1])
        spectrum = local_pca_spectrum(points)
        rotation = special_ortho_group.rvs(4, random_state=7)
        np.testing.assert_allclose(local_pca_spectrum(points @ rotation.T + 2.0), spectrum, rtol=1e-9)
        for factor in (0.01, 2.0, 250.0):
            with self.subTest(factor=factor):
                np.testing.assert_allclose(local_pca_spectrum(points * factor), factor * spectrum, rtol=1e-9)

    def test_spectrum_length_for_few_points(self):
        points = np.random.default_rng(1).normal(size=(3, 6))
        self.assertEqual(len(local_pca_spectrum(points)), 3)

    def test_threshold_rule_on_uniform_ball(self):
        rng = np.random.default_rng(21)
        d = 3
        directions = rng.normal(size=(20000, d))
        directions /= np.linalg.norm(directions, axis=1)[:, np.newaxis]
        radii = rng.uniform(0.0, 1.0, 20000) ** (1.0 / d)
        points = directions * radii[:, np.newaxis]
        spectrum = local_pca_spectrum(points)
        np.testing.assert_allclose(spectrum ** 2, pca_threshold_for(d), rtol=0.05)
        self.assertEqual(
            local_pca_dimension(points, "threshold", 0.5 * pca_threshold_for(d), squared=True), d
        )

    def test_degenerate_and_invalid(self):
        self.assertEqual(local_pca_dimension(np.ones((4, 3))), 0)
        with self.assertRaises(ValueError):
            local_pca_spectrum(np.zeros((1, 3)))
        with self.assertRaises(ValueError):
            dimension_from_spectrum([1.0, 0.5], "threshold")
        with self.assertRaises(ValueError):
            dimension_from_spectrum([1.0, 0.5], "median")

    def test_threshold_rule_counts_values_above(self):
        self.assertEqual(dimension_from_spectrum([0.9, 0.5, 0.1], "threshold", 0.4), 2)
        self.assertEqual(dimension_from_spectrum([0.3, 0.2], "threshold", 0.4), 0)

    def test_neighborhoods_on_planar_grid(self):
        xs, ys = np.meshgrid(np.arange(10.0), np.arange(10.0))
        coords = np.column_stack((xs.ravel(), ys.ravel(), np.zeros(100)))
        dims, mean = local_pca_neighborhoods(PointCloud(coords), 1.5)
        self.assertEqual(len(dims), 100)
        self.assertTrue(all(d == 2 for d in dims))
        self.assertEqual(mean, 2)

    def test_isolated_points_have_no_neighborhoods(self):
        cloud = PointCloud(np.array([[0.0, 0.0], [10.0, 0.0]]))
        self.assertEqual(local_pca_neighborhoods(cloud, 1.0), ([], None))


if __name__ == "__main__":
    unittest.main()
