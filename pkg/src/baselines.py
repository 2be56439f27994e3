"""
Baselines - jämförelseskattare: vinkelvarians (ANOVA), lokal PCA och k-tupler.

- beta_d: second moment about π/2 of the angle between two independent
  uniform directions in R^d (density ∝ sin^{d-2} on [0, π]).
- anova_statistic / anova_dimension: collect the three vertex angles of every
  triple of points whose mutual distances are <= eps, average (θ - π/2)^2 and
  pick the d whose beta_d is closest.
- anova_required_angles: normal-approximation angle budget for a confidence.
- expected_ktuples: expected number of k-point subsets of diameter <= eps.
- local_pca_spectrum / local_pca_dimension / local_pca_neighborhoods.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .geometry import euclidean_ball_volume
from .point_cloud import PointCloud

log = logging.getLogger(__name__)

ANOVA_D_RANGE = (1, 12)
RULE_MAX_GAP = "max-gap"
RULE_THRESHOLD = "threshold"


@dataclass(frozen=True)
class AngleSample:
    angles: np.ndarray
    triples: int

    @property
    def statistic(self) -> float:
        return float(np.mean((self.angles - math.pi / 2.0) ** 2))


def _angle_moment(d: float, power: int) -> float:
    """E[(θ - π/2)^power] under the density ∝ sin^{d-2}θ on [0, π]."""
    m = d - 2.0
    if m == 0:
        return float((math.pi / 2.0) ** power / (power + 1))

    # sin^m θ = [θ(π-θ)]^m · g(θ)^m with g smooth and g -> 1/π at both ends
    def smooth_part(theta: float) -> float:
        edge = theta * (math.pi - theta)
        ratio = math.sin(theta) / edge if edge > 0 else 1.0 / math.pi
        return ratio ** m

    opts = dict(weight="alg", wvar=(m, m), epsabs=1e-13, epsrel=1e-12, limit=200)
    num, _ = integrate.quad(
        lambda t: (t - math.pi / 2.0) ** power * smooth_part(t), 0.0, math.pi, **opts
    )
    den, _ = integrate.quad(smooth_part, 0.0, math.pi, **opts)
    return float(num / den)


def beta_d(d: float) -> float:
    if d < 2:
        raise ValueError(f"beta_d needs d >= 2 (got {d}).")
    return _angle_moment(d, 2)


def _anova_reference(d: int) -> float:
    # two directions on a line are parallel or opposite: θ ∈ {0, π}
    if d == 1:
        return (math.pi / 2.0) ** 2
    return beta_d(d)


def collect_angles(X: PointCloud, eps1: float) -> AngleSample:
    """
    All three vertex angles of each unordered triple with mutual distances <= eps1.

    Triples are enumerated in increasing (i, j, k) order.
    """
    if not eps1 > 0:
        raise ValueError("eps1 must be positive.")
    pairs = X.tree.query_pairs(eps1, output_type="ndarray") if X.n > 1 else np.zeros((0, 2), int)
    if pairs.size:
        sq = X.pair_sq_distances(pairs[:, 0], pairs[:, 1])
        pairs = pairs[sq > 0]
    neighbours: List[set] = [set() for _ in range(X.n)]
    for i, j in pairs:
        neighbours[int(i)].add(int(j))
        neighbours[int(j)].add(int(i))

    angles: List[float] = []
    triples = 0
    for i in range(X.n):
        later = sorted(v for v in neighbours[i] if v > i)
        for a, j in enumerate(later):
            for k in later[a + 1:]:
                if k not in neighbours[j]:
                    continue
                triples += 1
                angles.extend(_triangle_angles(X, i, j, k))
    return AngleSample(angles=np.array(angles, dtype=np.float64), triples=triples)


def _angle_at(X: PointCloud, apex: int, p: int, q: int) -> float:
    u, v = X.displacements(X.coords[apex], X.coords[[p, q]])
    cosine = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return math.acos(min(1.0, max(-1.0, cosine)))


def _triangle_angles(X: PointCloud, i: int, j: int, k: int) -> Tuple[float, float, float]:
    return (_angle_at(X, i, j, k), _angle_at(X, j, i, k), _angle_at(X, k, i, j))


def anova_statistic(X: PointCloud, eps1: float) -> Tuple[float, AngleSample]:
    sample = collect_angles(X, eps1)
    if sample.triples == 0:
        raise ValueError(f"cannot estimate: no triples within eps1={eps1}.")
    return sample.statistic, sample


def nearest_reference_dimension(
    statistic: float, d_range: Tuple[int, int] = ANOVA_D_RANGE
) -> int:
    """The d in d_range whose reference value is closest; ties go to the smaller d."""
    low, high = d_range
    if low < 1 or high < low:
        raise ValueError(f"Invalid dimension range {d_range}.")
    return min(range(low, high + 1), key=lambda d: (abs(statistic - _anova_reference(d)), d))


def anova_dimension(
    X: PointCloud, eps1: float, d_range: Tuple[int, int] = ANOVA_D_RANGE
) -> int:
    statistic, sample = anova_statistic(X, eps1)
    best = nearest_reference_dimension(statistic, d_range)
    log.debug("ANOVA: %d triples, B=%.6f -> d=%d", sample.triples, statistic, best)
    return best


def anova_required_angles(d: int, z: float = 1.64) -> int:
    """
    Angles needed so that z·σ/sqrt(N) equals the distance to the half-integer references.

    For d=4 this gives about 206 angles. The figure usually quoted for that
    case is 652; its construction is not given, so it is not reproduced.
    """
    if d < 2:
        raise ValueError("anova_required_angles needs d >= 2.")
    beta = beta_d(d)
    sigma = math.sqrt(_angle_moment(d, 4) - beta * beta)
    gap = min(_angle_moment(d - 0.5, 2) - beta, beta - _angle_moment(d + 0.5, 2))
    return max(1, math.ceil((z * sigma / gap) ** 2))


def expected_ktuples(n: int, k: int, d: int, eps: float, vol: float) -> float:
    if k < 2 or n < k:
        raise ValueError("Need k >= 2 and n >= k.")
    return float(special.comb(n, k, exact=False) * (euclidean_ball_volume(d, eps) / vol) ** (k - 1))


def local_pca_spectrum(points: np.ndarray) -> np.ndarray:
    """
    Principal standard deviations of a small point set, descending.

    Length is min(#points, ambient dim).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2:
        raise ValueError("local PCA needs at least two points.")
    centered = points - points.mean(axis=0)
    values = np.linalg.svd(centered, compute_uv=False) / math.sqrt(points.shape[0])
    length = min(points.shape)
    spectrum = np.zeros(length)
    spectrum[: values.size] = values[:length]
    if spectrum.size:
        spectrum[spectrum <= 1e-12 * spectrum[0]] = 0.0
    return spectrum


def local_pca_dimension(
    points: np.ndarray,
    rule: str = RULE_MAX_GAP,
    threshold: Optional[float] = None,
    squared: bool = False,
) -> int:
    """
    Args:
        points: neighborhood (m x s)
        rule: "max-gap" or "threshold"
        threshold: cut-off for the threshold rule
        squared: compare squared values to the threshold (1/(d+2) style cut-offs)

    Returns:
        dimension (0 for a degenerate neighborhood)
    """
    spectrum = local_pca_spectrum(points)
    return dimension_from_spectrum(spectrum, rule, threshold, squared)


def dimension_from_spectrum(
    spectrum: Sequence[float],
    rule: str = RULE_MAX_GAP,
    threshold: Optional[float] = None,
    squared: bool = False,
) -> int:
    values = np.asarray(spectrum, dtype=np.float64)
    if values.size == 0 or values[0] <= 0:
        return 0
    if rule == RULE_MAX_GAP:
        padded = np.append(values, 0.0)
        return int(np.argmax(padded[:-1] - padded[1:])) + 1
    if rule == RULE_THRESHOLD:
        if threshold is None:
            raise ValueError("threshold rule needs a threshold.")
        compare = values ** 2 if squared else values
        above = np.nonzero(compare >= threshold)[0]
        return int(above[-1]) + 1 if above.size else 0
    raise ValueError(f"Unknown PCA rule {rule!r}.")


def pca_threshold_for(d: int) -> float:
    """Squared cut-off 1/(d+2): the second moment of the uniform unit d-ball."""
    return 1.0 / (d + 2.0)


def local_pca_neighborhoods(
    X: PointCloud,
    eps: float,
    rule: str = RULE_MAX_GAP,
    threshold: Optional[float] = None,
    squared: bool = False,
) -> Tuple[List[int], Optional[int]]:
    """
    Local PCA on every neighborhood B(x, eps) with at least two points.

    Returns:
        (per-point dimensions, rounded mean or None when no neighborhood qualifies)
    """
    dims: List[int] = []
    tree = X.tree
    for i in range(X.n):
        members = tree.query_ball_point(tree.data[i], eps)
        if len(members) < 2:
            continue
        local = X.displacements(X.coords[i], X.coords[np.asarray(sorted(members))])
        dims.append(local_pca_dimension(local, rule, threshold, squared))
    if not dims:
        return dims, None
    return dims, int(math.floor(float(np.mean(dims)) + 0.5))
