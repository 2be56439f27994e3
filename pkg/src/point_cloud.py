"""
PointCloud - punktmoln med metrik (euklidisk eller platt torus) och CSV-I/O.

A cloud is an immutable n x s float64 matrix plus an optional per-coordinate
period vector. A coordinate with period 0 is Euclidean; a positive period
makes that coordinate circular, so a flat torus is "every coordinate has the
same period" and products of Euclidean and toroidal factors mix the two.

Distances between points are always the Euclidean norm of the per-coordinate
(circular where periodic) differences.

CSV format: one point per line, comma separated decimal floats, no header
unless requested.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)


class CloudParseError(ValueError):
    """CSV input problem; line is 1-based (0 when the whole file is at fault)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        prefix = f"line {line}: " if line else ""
        super().__init__(prefix + message)


def parse_metric(text: str, ambient_dim: int) -> Optional[np.ndarray]:
    """
    "euclidean" -> None, "flat-torus:PERIOD" -> constant period vector.
    """
    value = (text or "euclidean").strip().lower()
    if value == "euclidean":
        return None
    if value.startswith("flat-torus"):
        _, _, period_text = value.partition(":")
        try:
            period = float(period_text) if period_text else 2.0 * math.pi
        except ValueError:
            raise ValueError(f"Invalid flat-torus period: {period_text!r}")
        if not period > 0:
            raise ValueError("flat-torus period must be positive.")
        return np.full(ambient_dim, period)
    raise ValueError(f"Unknown metric {text!r} (use euclidean or flat-torus:PERIOD).")


@dataclass(frozen=True, eq=False)
class PointCloud:
    coords: np.ndarray
    periods: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64, copy=True)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 1)
        if coords.ndim != 2:
            raise ValueError("coords must be an n x s matrix.")
        if not np.all(np.isfinite(coords)):
            raise ValueError("All coordinates must be finite.")
        periods = None
        if self.periods is not None:
            periods = np.array(self.periods, dtype=np.float64, copy=True).reshape(-1)
            if periods.shape[0] != coords.shape[1]:
                raise ValueError("periods must have one entry per coordinate.")
            if np.any(periods < 0):
                raise ValueError("periods must be non-negative.")
            if not np.any(periods > 0):
                periods = None
            else:
                wrap = periods > 0
                coords[:, wrap] = np.mod(coords[:, wrap], periods[wrap])
                # np.mod can round a tiny negative up to the period itself
                coords[:, wrap] = np.where(coords[:, wrap] >= periods[wrap], 0.0, coords[:, wrap])
                periods.setflags(write=False)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "periods", periods)

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def ambient_dim(self) -> int:
        return int(self.coords.shape[1])

    @property
    def metric_name(self) -> str:
        if self.periods is None:
            return "euclidean"
        unique = np.unique(self.periods)
        if unique.size == 1:
            return f"flat-torus:{unique[0]:.17g}"
        return "mixed"

    def subset(self, indices) -> "PointCloud":
        return PointCloud(self.coords[np.asarray(indices)], self.periods)

    def displacements(self, origin: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Shortest difference vectors targets - origin under the metric."""
        delta = np.asarray(targets, dtype=np.float64) - np.asarray(origin, dtype=np.float64)
        if self.periods is None:
            return delta
        wrap = self.periods > 0
        p = self.periods[wrap]
        delta[..., wrap] = delta[..., wrap] - p * np.round(delta[..., wrap] / p)
        return delta

    def sq_distances_to(self, point: np.ndarray, block: Optional[np.ndarray] = None) -> np.ndarray:
        """Squared distances from one point to each row of block (default: whole cloud)."""
        rows = self.coords if block is None else block
        delta = np.abs(rows - point)
        if self.periods is not None:
            wrap = self.periods > 0
            delta[:, wrap] = np.minimum(delta[:, wrap], self.periods[wrap] - delta[:, wrap])
        return np.einsum("ij,ij->i", delta, delta)

    def pair_sq_distances(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Squared distances between coords[rows[k]] and coords[cols[k]]."""
        delta = np.abs(self.coords[np.asarray(rows)] - self.coords[np.asarray(cols)])
        if self.periods is not None:
            wrap = self.periods > 0
            delta[:, wrap] = np.minimum(delta[:, wrap], self.periods[wrap] - delta[:, wrap])
        return np.einsum("ij,ij->i", delta, delta)

    def pairwise_sq_distances(self) -> np.ndarray:
        """Condensed (i < j) squared distances, brute force."""
        if self.n < 2:
            return np.zeros(0)
        rows, cols = np.triu_indices(self.n, k=1)
        return self.pair_sq_distances(rows, cols)

    def pair_distance(self, i: int, j: int) -> float:
        return float(math.sqrt(self.sq_distances_to(self.coords[i], self.coords[j : j + 1])[0]))

    @cached_property
    def tree(self) -> cKDTree:
        """
        k-d tree honouring the metric.

        Euclidean coordinates inside a mixed cloud are shifted to start at 0
        and given a box three times their extent, so wrapping never applies
        to them.
        """
        if self.periods is None:
            return cKDTree(self.coords)
        data = np.array(self.coords, copy=True)
        box = np.array(self.periods, copy=True)
        flat = box == 0
        if np.any(flat):
            low = data[:, flat].min(axis=0) if self.n else np.zeros(int(flat.sum()))
            data[:, flat] -= low
            extent = data[:, flat].max(axis=0) if self.n else np.zeros(int(flat.sum()))
            box[flat] = 3.0 * extent + 1.0
        return cKDTree(data, boxsize=box)


def read_cloud_csv(
    path: Union[str, Path],
    periods: Optional[Sequence[float]] = None,
    metric: Optional[str] = None,
    skip_header: bool = False,
) -> PointCloud:
    """
    Read a point cloud. Errors carry the 1-based line number.

    Args:
        path: CSV file, one point per line
        periods: explicit per-coordinate periods
        metric: "euclidean" or "flat-torus:PERIOD" (ignored when periods given)
        skip_header: drop the first line

    Returns:
        PointCloud
    """
    rows = []
    width = None
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for line_no, record in enumerate(reader, start=1):
            if skip_header and line_no == 1:
                continue
            if not record or all(not cell.strip() for cell in record):
                continue
            try:
                values = [float(cell) for cell in record]
            except ValueError:
                raise CloudParseError(f"non-numeric value in {record!r}", line_no)
            if not all(math.isfinite(v) for v in values):
                raise CloudParseError("non-finite value", line_no)
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise CloudParseError(f"expected {width} columns, found {len(values)}", line_no)
            rows.append(values)

    if not rows:
        raise CloudParseError(f"no points in {path}")

    coords = np.array(rows, dtype=np.float64)
    if periods is None and metric is not None:
        periods = parse_metric(metric, coords.shape[1])
    log.info("Read %d points (dim %d) from %s", coords.shape[0], coords.shape[1], path)
    return PointCloud(coords, periods)


def write_cloud_csv(cloud: PointCloud, path: Union[str, Path]) -> None:
    """Write coordinates with repr precision so reading back is bit-exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        for row in cloud.coords:
            writer.writerow([repr(float(v)) for v in row])
    log.info("Wrote %d points to %s", cloud.n, path)
