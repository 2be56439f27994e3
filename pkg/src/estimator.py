"""
Estimator - parräkning och dimensionsskattning i två skalor.

- count_pairs / pair_count_curve: |PX(eps)|, the number of unordered pairs
  0 < |x - y| <= eps. Small clouds are counted brute force; larger ones through
  the cloud's k-d tree (periodic boxes for torus coordinates).
- dim_corr: round(log(c1/c2) / log(eps1/eps2)).
- dim_gp: single-scale log(2c/(n(n-1))) / log(eps).
- reach_free_test: choose R as the N-th smallest pair distance for a
  hypothesized d, set r = (eps2/eps1)·R and run dim_corr at (R, r).
- loglog_points / central_slope: plot data for log |PX(eps)| against log eps;
  the default grid ends at diameter_bound so the last count is n(n-1)/2.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist, pdist

from .geometry import ScalePair
from .planner import HeuristicPlan
from .point_cloud import PointCloud

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 64
LOGLOG_SENTINEL = -1.0
LOGLOG_GRID_SIZE = 50
DISTANCE_SAMPLE_LIMIT = 4000
DIAMETER_BLOCK = 2000

STATUS_OK = "ok"
STATUS_UNDEFINED = "undefined"
STATUS_GREATER_THAN = "greater_than"


@dataclass(frozen=True)
class PairCount:
    eps: float
    count: int


@dataclass(frozen=True)
class DimEstimate:
    """
    Result of a two-scale estimate.

    status is "ok" (rounded is the estimate), "greater_than" (no pairs at
    eps2; the dimension is above lower_bound) or "undefined" (no pairs at eps1).
    """

    count1: int
    count2: int
    raw_slope: Optional[float]
    rounded: Optional[int]
    status: str = STATUS_OK
    lower_bound: Optional[int] = None

    @property
    def defined(self) -> bool:
        return self.status == STATUS_OK

    def describe(self) -> str:
        if self.status == STATUS_UNDEFINED:
            return "undefined (no pairs at eps1)"
        if self.status == STATUS_GREATER_THAN:
            return f"undefined (no pairs at eps2); dimension > {self.lower_bound}"
        return str(self.rounded)


@dataclass(frozen=True)
class ReachFreeResult:
    estimate: DimEstimate
    R: float
    r: float
    passed: bool


@dataclass(frozen=True)
class LogLogCurve:
    log_eps: np.ndarray
    log_count: np.ndarray
    n: int

    @property
    def plateau(self) -> float:
        total = self.n * (self.n - 1) // 2
        return math.log(total) if total > 0 else LOGLOG_SENTINEL

    def rows(self) -> List[tuple]:
        return list(zip(self.log_eps.tolist(), self.log_count.tolist()))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise ValueError(f"eps must be positive (got {eps}).")


def pair_count_curve(X: PointCloud, eps_list: Sequence[float]) -> List[PairCount]:
    """Counts for several scales sharing one pass over the tree."""
    eps = np.asarray(eps_list, dtype=np.float64)
    if eps.ndim != 1 or eps.size == 0:
        return []
    if np.any(eps <= 0) or np.any(np.diff(eps) <= 0):
        raise ValueError("eps_list must be positive and strictly increasing.")
    if X.n < 2:
        return [PairCount(float(e), 0) for e in eps]

    if X.n < BRUTE_FORCE_LIMIT:
        sq = X.pairwise_sq_distances()
        sq = np.sort(sq[sq > 0])
        counts = np.searchsorted(sq, eps * eps, side="right")
    else:
        tree = X.tree
        radii = np.concatenate(([0.0], eps))
        ordered = np.asarray(tree.count_neighbors(tree, radii), dtype=np.int64)
        # ordered counts include (i, i) and duplicates; both sit at radius 0
        counts = (ordered[1:] - ordered[0]) // 2
    return [PairCount(float(e), int(c)) for e, c in zip(eps, counts)]


def count_pairs(X: PointCloud, eps: float) -> PairCount:
    _check_eps(eps)
    return pair_count_curve(X, [eps])[0]


def slope_from_counts(count1: int, count2: int, s: ScalePair) -> DimEstimate:
    """Two-scale estimate from the pair counts at eps1 and eps2."""
    if count1 <= 0:
        return DimEstimate(count1, count2, None, None, STATUS_UNDEFINED)
    if count2 <= 0:
        # with count2 := 1 the slope is a strict lower bound
        bound = math.log(count1) / s.log_ratio
        return DimEstimate(
            count1, count2, None, None, STATUS_GREATER_THAN, int(math.floor(bound))
        )
    raw = (math.log(count1) - math.log(count2)) / (math.log(s.eps1) - math.log(s.eps2))
    return DimEstimate(count1, count2, raw, round_half_up(raw))


def dim_corr(X: PointCloud, s: ScalePair) -> DimEstimate:
    curve = pair_count_curve(X, [s.eps2, s.eps1])
    return slope_from_counts(curve[1].count, curve[0].count, s)


def dim_gp(X: PointCloud, eps: float) -> float:
    """Single-scale estimate; raises ValueError when there are no pairs."""
    count = count_pairs(X, eps).count
    if count == 0:
        raise ValueError(f"No pairs at eps={eps}; estimate undefined.")
    if eps == 1.0:
        raise ValueError("eps must differ from 1.")
    return math.log(2.0 * count / (X.n * (X.n - 1))) / math.log(eps)


def _sorted_pair_distances(X: PointCloud, N: int) -> np.ndarray:
    """
    Sorted positive pair distances, containing at least every pair up to the N-th.
    """
    if N < 1:
        raise ValueError("N must be positive.")
    if X.n < BRUTE_FORCE_LIMIT:
        sq = X.pairwise_sq_distances()
    else:
        tree = X.tree
        # every pair is within the bounding-box diagonal
        reach_all = float(np.linalg.norm(np.ptp(X.coords, axis=0))) + 1.0
        available = count_pairs(X, reach_all).count
        if available < N:
            raise ValueError(f"cannot test d: only {available} pairs available, need {N}.")

        nearest, _ = tree.query(tree.data, k=2)
        positive = nearest[:, 1][nearest[:, 1] > 0]
        radius = min(float(np.median(positive)) if positive.size else reach_all, reach_all)
        while count_pairs(X, radius).count < N:
            radius = min(2.0 * radius, reach_all)

        pairs = tree.query_pairs(radius * (1.0 + 1e-9), output_type="ndarray")
        sq = X.pair_sq_distances(pairs[:, 0], pairs[:, 1])

    distances = np.sort(np.sqrt(sq[sq > 0]))
    if distances.size < N:
        raise ValueError(f"cannot test d: only {distances.size} pairs available, need {N}.")
    return distances


def nth_smallest_pair_distance(X: PointCloud, N: int) -> float:
    """N-th smallest positive pairwise distance (1-based)."""
    return float(_sorted_pair_distances(X, N)[N - 1])


def reach_free_test(X: PointCloud, d: int, plan: HeuristicPlan) -> ReachFreeResult:
    """
    Test the hypothesis dim = d without knowing the reach.

    Args:
        X: point cloud
        d: hypothesized dimension
        plan: heuristic plan for d (scales and pair budget N)

    Returns:
        ReachFreeResult; a missing eps2 count reports GreaterThan(d)
    """
    if plan.d != d:
        raise ValueError(f"Plan is for d={plan.d}, not d={d}.")
    distances = _sorted_pair_distances(X, plan.N_pairs)
    R = float(distances[plan.N_pairs - 1])
    r = plan.scales.ratio * R
    count1 = int(np.searchsorted(distances, R, side="right"))
    count2 = int(np.searchsorted(distances, r, side="right"))
    if count2 == 0:
        estimate = DimEstimate(count1, 0, None, None, STATUS_GREATER_THAN, d)
    else:
        estimate = slope_from_counts(count1, count2, ScalePair(R, r))
    passed = estimate.defined and estimate.rounded == d
    log.info("Reach-free test d=%d: R=%.6g r=%.6g -> %s", d, R, r, estimate.describe())
    return ReachFreeResult(estimate=estimate, R=R, r=r, passed=passed)


def _distance_sample(X: PointCloud) -> np.ndarray:
    """Positive pairwise distances, on a fixed subsample for large clouds."""
    cloud = X
    if X.n > DISTANCE_SAMPLE_LIMIT:
        rng = np.random.default_rng(0)
        cloud = X.subset(np.sort(rng.choice(X.n, DISTANCE_SAMPLE_LIMIT, replace=False)))
    sq = cloud.pairwise_sq_distances()
    return np.sqrt(sq[sq > 0])


def _euclidean_diameter(coords: np.ndarray) -> float:
    if coords.shape[1] == 1:
        return float(coords.max() - coords.min())
    if coords.shape[1] <= 3:
        try:
            coords = coords[ConvexHull(coords).vertices]
        except QhullError:
            # flat or degenerate cloud, fall through to the blocked scan
            pass
    if coords.shape[0] <= DISTANCE_SAMPLE_LIMIT:
        return float(pdist(coords).max()) if coords.shape[0] > 1 else 0.0
    best = 0.0
    for start in range(0, coords.shape[0], DIAMETER_BLOCK):
        best = max(best, float(cdist(coords[start : start + DIAMETER_BLOCK], coords).max()))
    return best


def diameter_bound(X: PointCloud) -> float:
    """
    Largest pair distance for Euclidean clouds.

    Small clouds with torus coordinates are measured exactly too. For large
    ones every wrapped coordinate contributes its half period, which is an
    upper bound on the diameter.
    """
    if X.periods is None:
        return _euclidean_diameter(X.coords)
    if X.n <= DISTANCE_SAMPLE_LIMIT:
        sq = X.pairwise_sq_distances()
        return float(math.sqrt(sq.max())) if sq.size else 0.0
    wrap = X.periods > 0
    half = X.periods[wrap] / 2.0
    flat = X.coords[:, ~wrap]
    spread = flat.max(axis=0) - flat.min(axis=0) if flat.shape[1] else np.zeros(0)
    return float(math.sqrt(float(np.sum(half**2)) + float(np.sum(spread**2))))


def default_eps_grid(X: PointCloud, size: int = LOGLOG_GRID_SIZE) -> np.ndarray:
    """Log-uniform scales from the 1st percentile pair distance to the diameter."""
    distances = _distance_sample(X)
    if distances.size == 0:
        raise ValueError("Cloud has no positive pair distances.")
    low = float(np.percentile(distances, 1))
    # the last scale must still count the farthest pair after rounding
    high = diameter_bound(X) * (1.0 + 1e-9)
    if high <= low:
        return np.array([high])
    return np.geomspace(low, high, size)


def loglog_points(X: PointCloud, eps_grid: Optional[Sequence[float]] = None) -> LogLogCurve:
    grid = default_eps_grid(X) if eps_grid is None else np.asarray(eps_grid, dtype=np.float64)
    counts = np.array([pc.count for pc in pair_count_curve(X, grid)], dtype=np.float64)
    log_count = np.full(counts.shape, LOGLOG_SENTINEL)
    positive = counts > 0
    log_count[positive] = np.log(counts[positive])
    return LogLogCurve(log_eps=np.log(grid), log_count=log_count, n=X.n)


def central_slope(curve: LogLogCurve, decades: float = 1.0) -> float:
    """
    Least-squares slope over `decades` of eps centered where log count is half the plateau.
    """
    defined = curve.log_count != LOGLOG_SENTINEL
    if np.count_nonzero(defined) < 2:
        raise ValueError("Curve has fewer than two defined points.")
    x = curve.log_eps[defined]
    y = curve.log_count[defined]
    center = float(np.interp(curve.plateau / 2.0, y, x))
    half_width = decades * math.log(10.0) / 2.0
    window = np.abs(x - center) <= half_width
    if np.count_nonzero(window) < 2:
        raise ValueError("Too few curve points inside the central window.")
    slope, _intercept = np.polyfit(x[window], y[window], 1)
    return float(slope)
