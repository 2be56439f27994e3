#!/usr/bin/env python3
import math
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.point_cloud import (
    CloudParseError,
    PointCloud,
    parse_metric,
    read_cloud_csv,
    write_cloud_csv,
)

TWO_PI = 2.0 * math.pi


class TestPointCloud(unittest.TestCase):
    def test_coordinates_are_read_only_copies(self):
        data = np.array([[0.0, 1.0], [2.0, 3.0]])
        cloud = PointCloud(data)
        data[0, 0] = 99.0
        self.assertEqual(cloud.coords[0, 0], 0.0)
        with self.assertRaises(ValueError):
            cloud.coords[0, 0] = 5.0

    def test_one_dimensional_input_becomes_column(self):
        cloud = PointCloud(np.array([0.0, 1.0, 3.0]))
        self.assertEqual(cloud.n, 3)
        self.assertEqual(cloud.ambient_dim, 1)

    def test_non_finite_rejected(self):
        with self.assertRaises(ValueError):
            PointCloud(np.array([[0.0, float("nan")]]))

    def test_periodic_coordinates_are_reduced(self):
        cloud = PointCloud(np.array([[TWO_PI + 0.5, -0.5]]), np.array([TWO_PI, TWO_PI]))
        self.assertAlmostEqual(cloud.coords[0, 0], 0.5, places=12)
        self.assertAlmostEqual(cloud.coords[0, 1], TWO_PI - 0.5, places=12)
        self.assertTrue(cloud.metric_name.startswith("flat-torus:"))

    def test_zero_periods_mean_euclidean(self):
        cloud = PointCloud(np.zeros((2, 2)), np.zeros(2))
        self.assertIsNone(cloud.periods)
        self.assertEqual(cloud.metric_name, "euclidean")

    def test_wrapped_distance(self):
        cloud = PointCloud(np.array([[0.1, 0.0], [TWO_PI - 0.1, 0.0]]), np.array([TWO_PI, TWO_PI]))
        self.assertAlmostEqual(cloud.pair_distance(0, 1), 0.2, places=12)

    def test_mixed_metric_only_wraps_periodic_columns(self):
        periods = np.array([TWO_PI, 0.0])
        cloud = PointCloud(np.array([[0.1, 0.0], [TWO_PI - 0.1, 6.0]]), periods)
        self.assertEqual(cloud.metric_name, "mixed")
        self.assertAlmostEqual(cloud.pair_distance(0, 1), math.sqrt(0.04 + 36.0), places=12)

    def test_tree_agrees_with_brute_force_on_mixed_metric(self):
        rng = np.random.default_rng(3)
        coords = np.column_stack((rng.uniform(0, TWO_PI, 150), rng.normal(0, 2, 150)))
        cloud = PointCloud(coords, np.array([TWO_PI, 0.0]))
        pairs = cloud.tree.query_pairs(1.0, output_type="ndarray")
        brute = int(np.count_nonzero(cloud.pairwise_sq_distances() <= 1.0))
        self.assertEqual(len(pairs), brute)

    def test_displacements_use_minimum_image(self):
        cloud = PointCloud(np.zeros((1, 2)), np.array([TWO_PI, TWO_PI]))
        delta = cloud.displacements(np.array([0.1, 0.1]), np.array([[TWO_PI - 0.1, 0.3]]))
        np.testing.assert_allclose(delta, [[-0.2, 0.2]], atol=1e-12)

    def test_subset(self):
        cloud = PointCloud(np.arange(12, dtype=float).reshape(6, 2))
        part = cloud.subset([1, 3])
        np.testing.assert_array_equal(part.coords, [[2.0, 3.0], [6.0, 7.0]])

    def test_parse_metric(self):
        self.assertIsNone(parse_metric("euclidean", 3))
        np.testing.assert_allclose(parse_metric("flat-torus:2.5", 2), [2.5, 2.5])
        np.testing.assert_allclose(parse_metric("flat-torus", 1), [TWO_PI])
        for bad in ("manhattan", "flat-torus:0", "flat-torus:abc"):
            with self.assertRaises(ValueError):
                parse_metric(bad, 2)


class TestCloudCsv(unittest.TestCase):
    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    def _write(self, name: str, text: str) -> Path:
        path = Path(self.tmp_dir) / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_read_simple_cloud(self):
        path = self._write("cloud.csv", "0,0\n1,0\n\n2,0\n")
        cloud = read_cloud_csv(path)
        self.assertEqual(cloud.n, 3)
        self.assertEqual(cloud.ambient_dim, 2)

    def test_header_can_be_skipped(self):
        path = self._write("cloud.csv", "x,y\n0,0\n1,1\n")
        self.assertEqual(read_cloud_csv(path, skip_header=True).n, 2)
        with self.assertRaises(CloudParseError) as ctx:
            read_cloud_csv(path)
        self.assertEqual(ctx.exception.line, 1)

    def test_column_mismatch_reports_line(self):
        path = self._write("cloud.csv", "0,0\n1,0\n2\n")
        with self.assertRaises(CloudParseError) as ctx:
            read_cloud_csv(path)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn("line 3", str(ctx.exception))

    def test_non_finite_value_rejected(self):
        path = self._write("cloud.csv", "0,0\ninf,0\n")
        with self.assertRaises(CloudParseError) as ctx:
            read_cloud_csv(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_empty_file_is_an_error(self):
        path = self._write("empty.csv", "")
        with self.assertRaises(CloudParseError):
            read_cloud_csv(path)

    def test_metric_applied_on_read(self):
        path = self._write("torus.csv", "7.0,0.5\n")
        cloud = read_cloud_csv(path, metric="flat-torus:6.5")
        self.assertAlmostEqual(cloud.coords[0, 0], 0.5, places=12)

    def test_write_then_read_is_bit_exact(self):
        rng = np.random.default_rng(11)
        cloud = PointCloud(rng.normal(size=(40, 3)))
        path = Path(self.tmp_dir) / "nested" / "out.csv"
        write_cloud_csv(cloud, path)
        back = read_cloud_csv(path)
        np.testing.assert_array_equal(back.coords, cloud.coords)

    def test_missing_file_raises_os_error(self):
        with self.assertRaises(OSError):
            read_cloud_csv(Path(self.tmp_dir) / "missing.csv")


if __name__ == "__main__":
    unittest.main()
