"""
Samplers - likformiga stickprov på syntetiska mångfalder.

Every sampler draws independent points, uniformly with respect to the
Riemannian volume (the Gaussian follows its own law). Spec strings:

    sphere:D          unit D-sphere in R^{D+1}
    clifford:D        product of D unit circles in R^{2D}
    flat:D[:PERIOD]   flat torus R^D / PERIOD·Z^D (default period 2π)
    rotation          torus of revolution, R=2, r=1, in R^3
    swissroll         (t cos t, y, t sin t), area-uniform
    swissroll-raw     same parametrization, t uniform (library behaviour)
    schwarz           cos x + cos y + cos z = 0 inside the flat 3-torus
    gaussian:D        standard normal in R^D
    product(A,B)      Cartesian product, coordinates concatenated

Random streams: (master_seed, stream_id) -> numpy Generator through
SeedSequence, so trial t of an experiment uses stream t.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import integrate

from .geometry import sphere_surface_measure
from .point_cloud import PointCloud

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
ROTATION_R = 2.0
ROTATION_r = 1.0
SWISS_T_MIN = 1.5 * math.pi
SWISS_T_MAX = 4.5 * math.pi
SWISS_HEIGHT = 21.0
DEFAULT_SAMPLE_CAP = 200_000
_BATCH = 256

SIMPLE_KINDS = ("rotation", "swissroll", "swissroll-raw", "schwarz")
DIMENSIONED_KINDS = ("sphere", "clifford", "flat", "gaussian")


class SamplingCapExceeded(RuntimeError):
    """sample_until_pairs used more points than allowed."""


@dataclass(frozen=True)
class Seed:
    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=int(self.master_seed) & 0xFFFFFFFFFFFFFFFF,
            spawn_key=(int(self.stream_id),),
        )
        return np.random.default_rng(sequence)


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    dim: int = 0
    period: float = TWO_PI
    factors: Tuple["ManifoldSpec", ...] = ()

    @property
    def intrinsic_dim(self) -> int:
        if self.kind == "product":
            return sum(f.intrinsic_dim for f in self.factors)
        if self.kind in ("rotation", "swissroll", "swissroll-raw", "schwarz"):
            return 2
        return self.dim

    @property
    def ambient_dim(self) -> int:
        if self.kind == "product":
            return sum(f.ambient_dim for f in self.factors)
        if self.kind == "sphere":
            return self.dim + 1
        if self.kind == "clifford":
            return 2 * self.dim
        if self.kind in ("flat", "gaussian"):
            return self.dim
        return 3

    @property
    def periods(self) -> Optional[np.ndarray]:
        """Per-coordinate periods (0 = Euclidean), None when nothing wraps."""
        if self.kind == "product":
            parts = [
                f.periods if f.periods is not None else np.zeros(f.ambient_dim)
                for f in self.factors
            ]
            joined = np.concatenate(parts)
            return joined if np.any(joined > 0) else None
        if self.kind == "flat":
            return np.full(self.dim, self.period)
        if self.kind == "schwarz":
            return np.full(3, TWO_PI)
        return None

    @property
    def label(self) -> str:
        if self.kind == "product":
            return "product(" + ",".join(f.label for f in self.factors) + ")"
        if self.kind == "flat" and not math.isclose(self.period, TWO_PI):
            return f"flat:{self.dim}:{self.period:.17g}"
        if self.kind in DIMENSIONED_KINDS:
            return f"{self.kind}:{self.dim}"
        return self.kind

    def __str__(self) -> str:
        return self.label


def _split_top_level(text: str):
    depth = 0
    parts, current = [], []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValueError("Unbalanced parentheses in manifold spec.")
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    if depth != 0:
        raise ValueError("Unbalanced parentheses in manifold spec.")
    parts.append("".join(current))
    return parts


def parse_manifold(text: str) -> ManifoldSpec:
    value = text.strip().lower().replace(" ", "")
    if value.startswith("product(") and value.endswith(")"):
        inner = _split_top_level(value[len("product("):-1])
        if len(inner) < 2:
            raise ValueError("product(...) needs at least two factors.")
        return ManifoldSpec("product", factors=tuple(parse_manifold(p) for p in inner))

    aliases = {"clifford-torus": "clifford", "flat-torus": "flat", "schwarzp": "schwarz",
               "rotation-torus": "rotation", "swiss-roll": "swissroll"}
    head, _, rest = value.partition(":")
    head = aliases.get(head, head)
    if head in SIMPLE_KINDS:
        if rest:
            raise ValueError(f"{head} takes no parameters.")
        return ManifoldSpec(head)
    if head in DIMENSIONED_KINDS:
        dim_text, _, period_text = rest.partition(":")
        try:
            dim = int(dim_text)
        except ValueError:
            raise ValueError(f"{head} needs an integer dimension, e.g. {head}:2")
        if dim < 1:
            raise ValueError("Manifold dimension must be at least 1.")
        if period_text:
            if head != "flat":
                raise ValueError(f"{head} takes no period.")
            period = float(period_text)
            if not period > 0:
                raise ValueError("Period must be positive.")
            return ManifoldSpec(head, dim, period)
        return ManifoldSpec(head, dim)
    raise ValueError(f"Unknown manifold spec {text!r}.")


# ---------------------------------------------------------------------------
# Samplers per kind: (spec, n, rng) -> n x ambient array
# ---------------------------------------------------------------------------

def _sample_sphere(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal((n, spec.dim + 1))
    norms = np.linalg.norm(x, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        x[bad] = rng.standard_normal((int(bad.sum()), spec.dim + 1))
        norms = np.linalg.norm(x, axis=1)
    return x / norms[:, np.newaxis]


def _sample_clifford(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    angles = rng.uniform(0.0, TWO_PI, (n, spec.dim))
    out = np.empty((n, 2 * spec.dim))
    out[:, 0::2] = np.cos(angles)
    out[:, 1::2] = np.sin(angles)
    return out


def _sample_flat(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, spec.period, (n, spec.dim))


def _sample_gaussian(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n, spec.dim))


def _rejection(n: int, rng: np.random.Generator, propose: Callable, weight: Callable) -> np.ndarray:
    """Accept proposals with probability weight(value) in [0, 1] until n are kept."""
    kept = []
    total = 0
    while total < n:
        batch = max(_BATCH, 2 * (n - total))
        values = propose(batch)
        accept = rng.uniform(0.0, 1.0, batch) < weight(values)
        chosen = values[accept]
        kept.append(chosen)
        total += chosen.shape[0]
    return np.concatenate(kept)[:n]


def _sample_rotation(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(0.0, TWO_PI, n)
    # area element ∝ R + r cos v
    v = _rejection(
        n,
        rng,
        lambda m: rng.uniform(0.0, TWO_PI, m),
        lambda t: (ROTATION_R + ROTATION_r * np.cos(t)) / (ROTATION_R + ROTATION_r),
    )
    ring = ROTATION_R + ROTATION_r * np.cos(v)
    return np.column_stack((ring * np.cos(u), ring * np.sin(u), ROTATION_r * np.sin(v)))


def _swiss_points(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.column_stack((t * np.cos(t), y, t * np.sin(t)))


def _sample_swissroll(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    # arc length element of (t cos t, t sin t) is sqrt(1 + t^2)
    t = _rejection(
        n,
        rng,
        lambda m: rng.uniform(SWISS_T_MIN, SWISS_T_MAX, m),
        lambda s: np.sqrt(1.0 + s * s) / math.sqrt(1.0 + SWISS_T_MAX ** 2),
    )
    y = rng.uniform(0.0, SWISS_HEIGHT, n)
    return _swiss_points(t, y)


def _sample_swissroll_raw(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    t = SWISS_T_MIN * (1.0 + 2.0 * rng.uniform(0.0, 1.0, n))
    y = SWISS_HEIGHT * rng.uniform(0.0, 1.0, n)
    return _swiss_points(t, y)


def _schwarz_area_weight(points: np.ndarray) -> np.ndarray:
    """1 / Σ|n_k| for the unit normal n ∝ (sin x, sin y, sin z)."""
    s = np.abs(np.sin(points))
    return np.sqrt(np.einsum("ij,ij->i", s, s)) / s.sum(axis=1)


def _sample_schwarz(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Pick an axis, draw the other two coordinates uniformly where the surface
    has a solution, solve for the third on a random sheet, and thin by
    1/Σ|n_k| so the result is uniform in area.
    """
    kept = []
    total = 0
    while total < n:
        batch = max(_BATCH, 4 * (n - total))
        a = rng.uniform(0.0, TWO_PI, batch)
        b = rng.uniform(0.0, TWO_PI, batch)
        axis = rng.integers(0, 3, batch)
        sheet = rng.integers(0, 2, batch)
        thin = rng.uniform(0.0, 1.0, batch)

        level = -(np.cos(a) + np.cos(b))
        inside = np.abs(level) <= 1.0
        c = np.arccos(np.clip(level, -1.0, 1.0))
        c = np.where(sheet == 1, np.mod(TWO_PI - c, TWO_PI), c)

        points = np.empty((batch, 3))
        for k in range(3):
            rows = axis == k
            others = [j for j in range(3) if j != k]
            points[rows, k] = c[rows]
            points[rows, others[0]] = a[rows]
            points[rows, others[1]] = b[rows]

        accept = inside & (thin < _schwarz_area_weight(points))
        kept.append(points[accept])
        total += int(accept.sum())
    return np.concatenate(kept)[:n]


def _sample_product(spec: ManifoldSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return np.hstack([_SAMPLERS[f.kind](f, n, rng) for f in spec.factors])


_SAMPLERS: Dict[str, Callable[[ManifoldSpec, int, np.random.Generator], np.ndarray]] = {
    "sphere": _sample_sphere,
    "clifford": _sample_clifford,
    "flat": _sample_flat,
    "gaussian": _sample_gaussian,
    "rotation": _sample_rotation,
    "swissroll": _sample_swissroll,
    "swissroll-raw": _sample_swissroll_raw,
    "schwarz": _sample_schwarz,
    "product": _sample_product,
}


def sample(spec: ManifoldSpec, n: int, seed: Seed) -> PointCloud:
    if n < 0:
        raise ValueError("n must be non-negative.")
    rng = seed.generator()
    coords = _SAMPLERS[spec.kind](spec, n, rng) if n else np.zeros((0, spec.ambient_dim))
    return PointCloud(coords, spec.periods)


def sample_until_pairs(
    spec: ManifoldSpec,
    eps1: float,
    N: int,
    seed: Seed,
    cap: int = DEFAULT_SAMPLE_CAP,
) -> PointCloud:
    """
    Add points one at a time until at least N pairs lie within eps1.

    The cloud returned is minimal: dropping its last point leaves fewer than N pairs.
    """
    if N < 1:
        raise ValueError("N must be at least 1.")
    if not eps1 > 0:
        raise ValueError("eps1 must be positive.")
    rng = seed.generator()
    sampler = _SAMPLERS[spec.kind]
    metric_view = PointCloud(np.zeros((1, spec.ambient_dim)), spec.periods)
    eps_sq = eps1 * eps1

    capacity = 1024
    coords = np.empty((capacity, spec.ambient_dim))
    n = 0
    pairs = 0
    while pairs < N:
        block = sampler(spec, _BATCH, rng)
        # reduce like PointCloud does so distances match the final cloud
        block = PointCloud(block, spec.periods).coords
        for point in block:
            if n >= cap:
                raise SamplingCapExceeded(
                    f"{spec.label}: {n} points gave only {pairs} pairs at eps1={eps1} (need {N})."
                )
            if n:
                sq = metric_view.sq_distances_to(point, coords[:n])
                pairs += int(np.count_nonzero((sq > 0) & (sq <= eps_sq)))
            if n == capacity:
                capacity *= 2
                grown = np.empty((capacity, spec.ambient_dim))
                grown[:n] = coords[:n]
                coords = grown
            coords[n] = point
            n += 1
            if pairs >= N:
                break
    log.debug("%s: %d points for %d pairs at eps1=%.4g", spec.label, n, pairs, eps1)
    return PointCloud(coords[:n], spec.periods)


@lru_cache(maxsize=None)
def schwarz_area() -> float:
    """
    Area of cos x + cos y + cos z = 0 in the flat 3-torus.

    Projecting each piece onto the coordinate plane it is a graph over gives
    A = 6 ∬_R dx dy / Σ|n_k|, with R = {|cos x + cos y| <= 1}; the region is
    symmetric in x -> 2π - x and y -> 2π - y.
    """

    def weight(y: float, x: float) -> float:
        level = -(math.cos(x) + math.cos(y))
        z = math.acos(min(1.0, max(-1.0, level)))
        s = (abs(math.sin(x)), abs(math.sin(y)), abs(math.sin(z)))
        total = s[0] + s[1] + s[2]
        return math.sqrt(s[0] ** 2 + s[1] ** 2 + s[2] ** 2) / total if total > 0 else 1.0

    opts = dict(epsabs=1e-10, epsrel=1e-10)
    # cos x >= 0: y from arccos(1 - cos x) to π
    right, _ = integrate.dblquad(
        weight, 0.0, math.pi / 2.0,
        lambda x: math.acos(min(1.0, 1.0 - math.cos(x))), lambda x: math.pi, **opts
    )
    # cos x < 0: y from 0 to arccos(-1 - cos x)
    left, _ = integrate.dblquad(
        weight, math.pi / 2.0, math.pi,
        lambda x: 0.0, lambda x: math.acos(max(-1.0, -1.0 - math.cos(x))), **opts
    )
    return 6.0 * 4.0 * (right + left)


@lru_cache(maxsize=None)
def swissroll_area() -> float:
    length, _ = integrate.quad(lambda t: math.sqrt(1.0 + t * t), SWISS_T_MIN, SWISS_T_MAX)
    return SWISS_HEIGHT * length


def reference_volume(spec: ManifoldSpec) -> float:
    """Riemannian volume; ValueError for the Gaussian (infinite support)."""
    kind = spec.kind
    if kind == "sphere":
        return sphere_surface_measure(spec.dim + 1)
    if kind == "clifford":
        return TWO_PI ** spec.dim
    if kind == "flat":
        return spec.period ** spec.dim
    if kind == "rotation":
        return (TWO_PI * ROTATION_r) * (TWO_PI * ROTATION_R)
    if kind in ("swissroll", "swissroll-raw"):
        return swissroll_area()
    if kind == "schwarz":
        return schwarz_area()
    if kind == "product":
        return float(np.prod([reference_volume(f) for f in spec.factors]))
    raise ValueError(f"{spec.label}: infinite support, no reference volume.")
