"""
Geometry - volymformler för konstant krökning och gränser för tjocka diagonalen.

Numerical kernels used by the planner and the estimator:

- integral_sin_pow / integral_sinh_pow: the radial integrals behind ball
  volumes in the unit sphere and in the hyperbolic comparison space.
- sphere_surface_measure / euclidean_ball_volume: closed forms via scipy.special.
- cv / cr: lower bound for the volume of a small ball on a manifold with
  reach >= 1, and upper bound for the ratio between the largest and smallest
  such ball.
- diagonal_ratio_bounds / gap_delta: two-sided bounds for
  vol(DM(eps1)) / vol(DM(eps2)) and the resulting margin by which the
  two-scale slope stays inside (d - 1/2, d + 1/2).

All functions are pure and safe to call from several threads.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from scipy import integrate, special

log = logging.getLogger(__name__)

QUAD_ABS_TOL = 1e-12
QUAD_REL_TOL = 1e-12
QUAD_LIMIT = 200


@dataclass(frozen=True)
class ScalePair:
    """The two radii eps1 > eps2 > 0 used by estimators and planners."""

    eps1: float
    eps2: float

    def __post_init__(self):
        if not (math.isfinite(self.eps1) and math.isfinite(self.eps2)):
            raise ValueError("Scales must be finite numbers.")
        if not 0.0 < self.eps2 < self.eps1:
            raise ValueError(
                f"Scales must satisfy 0 < eps2 < eps1 (got eps1={self.eps1}, eps2={self.eps2})."
            )

    @property
    def ratio(self) -> float:
        """eps2 / eps1, always in (0, 1)."""
        return self.eps2 / self.eps1

    @property
    def log_ratio(self) -> float:
        """log(eps1 / eps2) > 0."""
        return math.log(self.eps1 / self.eps2)


@dataclass(frozen=True)
class RatioBounds:
    lower: float
    upper: float


def check_dimension(d) -> int:
    if isinstance(d, bool) or int(d) != d or d < 1:
        raise ValueError(f"Dimension must be a positive integer (got {d}).")
    return int(d)


def max_eps1(d: int) -> float:
    """Largest (exclusive) eps1 for which the reach-based bounds hold."""
    return 2.0 if d == 1 else 1.0


def check_scales_for_bounds(d: int, s: ScalePair) -> None:
    limit = max_eps1(d)
    if s.eps1 >= limit:
        raise ValueError(f"eps1 must be < {limit:g} for d={d} (got {s.eps1}).")


def _quad(func, upper: float) -> float:
    value, _err = integrate.quad(
        func, 0.0, upper, epsabs=QUAD_ABS_TOL, epsrel=QUAD_REL_TOL, limit=QUAD_LIMIT
    )
    return float(value)


def integral_sin_pow(d: int, x: float) -> float:
    """∫₀ˣ sin^{d-1}(t) dt for x in [0, π]."""
    d = check_dimension(d)
    if not 0.0 <= x <= math.pi:
        raise ValueError(f"x must lie in [0, pi] (got {x}).")
    if x == 0.0:
        return 0.0
    if d == 1:
        return float(x)
    return _quad(lambda t: math.sin(t) ** (d - 1), x)


def integral_sinh_pow(d: int, x: float) -> float:
    """∫₀ˣ sinh^{d-1}(t) dt for x >= 0."""
    d = check_dimension(d)
    if x < 0.0:
        raise ValueError(f"x must be non-negative (got {x}).")
    if x == 0.0:
        return 0.0
    if d == 1:
        return float(x)
    return _quad(lambda t: math.sinh(t) ** (d - 1), x)


def sphere_surface_measure(d: int) -> float:
    """(d-1)-measure of the unit sphere in R^d: 2 π^{d/2} / Γ(d/2)."""
    d = check_dimension(d)
    return float(2.0 * math.pi ** (d / 2.0) / special.gamma(d / 2.0))


def euclidean_ball_volume(d: int, r: float) -> float:
    d = check_dimension(d)
    if r < 0:
        raise ValueError(f"Radius must be non-negative (got {r}).")
    return float(math.pi ** (d / 2.0) * r ** d / special.gamma(d / 2.0 + 1.0))


def cv(d: int, eps: float) -> float:
    """Volume of the eps-ball in the unit d-sphere."""
    if not 0.0 < eps <= math.pi:
        raise ValueError(f"eps must lie in (0, pi] (got {eps}).")
    return sphere_surface_measure(d) * integral_sin_pow(d, eps)


def _hyperbolic_radius(eps: float) -> float:
    return 2.0 * math.sqrt(2.0) * math.asin(eps / 2.0)


def cr(d: int, eps: float) -> float:
    """Ratio of the hyperbolic (curvature -2) ball to the spherical ball."""
    d = check_dimension(d)
    if not 0.0 < eps < 2.0:
        raise ValueError(f"eps must lie in (0, 2) (got {eps}).")
    numerator = 2.0 ** (-d / 2.0) * integral_sinh_pow(d, _hyperbolic_radius(eps))
    return numerator / integral_sin_pow(d, eps)


def _lower_ratio(d: int, s: ScalePair) -> float:
    if d == 1:
        return s.eps1 / s.eps2
    chord = 2.0 * math.asin(s.eps2 / 2.0)
    return (s.eps1 / chord) * (math.sin(s.eps1) / math.sin(chord)) ** (d - 1)


def _upper_ratio(d: int, s: ScalePair) -> float:
    if d == 1:
        return 1.0 + 2.0 * math.asin((s.eps1 - s.eps2) / 2.0) / s.eps2
    top = integral_sinh_pow(d, _hyperbolic_radius(s.eps1))
    bottom = integral_sinh_pow(d, math.sqrt(2.0) * s.eps2)
    return top / bottom


def diagonal_ratio_bounds(d: int, s: ScalePair) -> RatioBounds:
    """
    Bounds for vol(DM(eps1)) / vol(DM(eps2)) on a closed d-manifold with reach >= 1.

    The lower bound is clamped at 1 since DM(eps2) is contained in DM(eps1).

    Args:
        d: intrinsic dimension
        s: scales, eps1 < 1 (eps1 < 2 when d == 1)

    Returns:
        RatioBounds with 1 <= lower <= upper
    """
    d = check_dimension(d)
    check_scales_for_bounds(d, s)
    lower = max(1.0, _lower_ratio(d, s))
    upper = max(lower, _upper_ratio(d, s))
    return RatioBounds(lower=lower, upper=upper)


def gap_delta(d: int, s: ScalePair) -> float:
    """
    Margin Δ such that |log(ratio)/log(eps1/eps2) - d| <= 1/2 - Δ.

    Δ <= 0 is a valid answer and means the scales cannot separate d from d ± 1.
    """
    bounds = diagonal_ratio_bounds(d, s)
    log_ratio = s.log_ratio
    upper_margin = d + 0.5 - math.log(bounds.upper) / log_ratio
    lower_margin = math.log(bounds.lower) / log_ratio - (d - 0.5)
    return min(upper_margin, lower_margin)
