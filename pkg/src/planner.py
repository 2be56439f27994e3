"""
Planner - hur många punkter (eller par) behövs för en given säkerhet?

Two planners live here:

1. The reach-based plan. For a closed d-manifold with reach >= 1 and scales
   (eps1, eps2) with a positive gap Δ, sampling at least

       n(vol) = n_const + n_coeff * sqrt(vol)

   points makes the two-scale estimator return d with probability at least
   1 - failure_prob. `scale_search` scans a grid of scales and α-splits for
   the smallest n at a given volume.

2. The heuristic binomial plan. Each eps1-close pair is treated as an
   independent Bernoulli trial that is also eps2-close with probability
   E_d = (eps2/eps1)^d. From this we get the number N of eps1-pairs needed,
   both by a normal approximation and by exact binomial tails, and the
   point count that is expected to produce N pairs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import stats

from .geometry import (
    ScalePair,
    check_dimension,
    cr,
    cv,
    euclidean_ball_volume,
    gap_delta,
    integral_sinh_pow,
    max_eps1,
)

log = logging.getLogger(__name__)

DEFAULT_FAILURE_PROB = 0.1
DEFAULT_GRID_STEP = 0.01
DEFAULT_ALPHA_STEP = 0.01
CLT_Z_90 = 1.64

# Published scales and α1 per dimension (volume of the flat torus).
PUBLISHED_SCALES: Dict[int, Tuple[float, float, float]] = {
    1: (1.5, 0.19, 0.15),
    2: (0.78, 0.2, 0.11),
    3: (0.63, 0.23, 0.09),
    4: (0.54, 0.23, 0.06),
    5: (0.46, 0.22, 0.04),
    6: (0.4, 0.21, 0.03),
    7: (0.36, 0.21, 0.03),
    8: (0.33, 0.2, 0.02),
    9: (0.31, 0.19, 0.02),
    10: (0.29, 0.18, 0.01),
}


class InfeasiblePlanError(ValueError):
    """Raised when no positive gap exists for the requested scales."""


def published_scales(d: int) -> ScalePair:
    d = check_dimension(d)
    if d not in PUBLISHED_SCALES:
        raise ValueError(f"No published scales for d={d} (available: 1..10).")
    eps1, eps2, _alpha = PUBLISHED_SCALES[d]
    return ScalePair(eps1, eps2)


# ---------------------------------------------------------------------------
# Reach-based plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoreticalPlan:
    d: int
    scales: ScalePair
    alpha1: float
    delta: float
    rho: float
    n_const: float
    n_coeff: float
    failure_prob: float = DEFAULT_FAILURE_PROB

    @property
    def alpha2(self) -> float:
        return 1.0 - self.alpha1

    def n_for_volume(self, vol: float) -> int:
        """
        Integer number of points for a manifold of volume vol.

        Both terms of the law are rounded up before they are combined, the
        way the published point counts are quoted.
        """
        if vol <= 0:
            raise ValueError("vol must be positive.")
        return math.ceil(math.ceil(self.n_const) + math.ceil(self.n_coeff) * math.sqrt(vol))


def rho_for_target(s: ScalePair, delta: float, failure_prob: float) -> float:
    if delta <= 0:
        raise ValueError(f"delta must be positive (got {delta}).")
    if not 0.0 <= failure_prob < 1.0:
        raise ValueError(f"failure_prob must lie in [0, 1) (got {failure_prob}).")
    return failure_prob * (1.0 - s.ratio ** (delta / 2.0)) ** 2


def _check_alpha(alpha1: float) -> None:
    if not 0.0 < alpha1 < 1.0:
        raise ValueError(f"alpha1 must lie in (0, 1) (got {alpha1}).")


def _per_scale_terms(d: int, s: ScalePair, alpha1: float, rho: float):
    """[(alpha_i, CV(eps_i), CR(eps_i)) for i = 1, 2]."""
    _check_alpha(alpha1)
    if rho <= 0:
        raise ValueError(f"rho must be positive (got {rho}).")
    return [
        (alpha1, cv(d, s.eps1), cr(d, s.eps1)),
        (1.0 - alpha1, cv(d, s.eps2), cr(d, s.eps2)),
    ]


def plan_terms(d: int, s: ScalePair, alpha1: float, rho: float) -> Tuple[float, float]:
    """
    The volume-separated law n(vol) = n_const + n_coeff * sqrt(vol).

    Returns:
        (n_const, n_coeff)
    """
    terms = _per_scale_terms(d, s, alpha1, rho)
    n_const = 1.0 + max((c_r - 1.0) ** 2 / (a * rho) for a, _c_v, c_r in terms)
    n_coeff = max(math.sqrt(2.0 / (a * rho * c_v)) for a, c_v, _c_r in terms)
    return n_const, n_coeff


def n_required(d: int, s: ScalePair, alpha1: float, vol: float, rho: float) -> float:
    if vol <= 0:
        raise ValueError("vol must be positive.")
    n_const, n_coeff = plan_terms(d, s, alpha1, rho)
    return n_const + n_coeff * math.sqrt(vol)


def n_required_tight(d: int, s: ScalePair, alpha1: float, vol: float, rho: float) -> float:
    """Same bound without splitting the maximum; never above n_required."""
    if vol <= 0:
        raise ValueError("vol must be positive.")
    terms = _per_scale_terms(d, s, alpha1, rho)
    return max(
        1.0 + (c_r - 1.0) ** 2 / (a * rho) + math.sqrt(2.0 * vol / (a * rho * c_v))
        for a, c_v, c_r in terms
    )


def n_required_constant_volume(
    d: int, s: ScalePair, alpha1: float, vol: float, rho: float
) -> float:
    """Bound for manifolds where every eps-ball has the same volume (spheres, Clifford tori)."""
    if vol <= 0:
        raise ValueError("vol must be positive.")
    terms = _per_scale_terms(d, s, alpha1, rho)
    return 1.0 + max(math.sqrt(2.0 * vol / (a * rho * c_v)) for a, c_v, _c_r in terms)


def failure_probability_bound(d: int, s: ScalePair, n: int, vol: float) -> float:
    """
    Upper bound for P(two-scale estimate is off by more than the gap allows).

    Can exceed 1, in which case it says nothing.
    """
    if n < 2:
        raise ValueError("n must be at least 2.")
    delta = gap_delta(d, s)
    if delta <= 0:
        raise InfeasiblePlanError(f"Scales {s} have no positive gap for d={d}.")
    spread = 0.0
    for eps in (s.eps1, s.eps2):
        spread += 2.0 * vol / ((n - 1) ** 2 * cv(d, eps)) + (cr(d, eps) - 1.0) ** 2 / (n - 1)
    return spread / (1.0 - s.ratio ** (delta / 2.0)) ** 2


def theoretical_plan(
    d: int,
    s: Optional[ScalePair] = None,
    alpha1: Optional[float] = None,
    failure_prob: float = DEFAULT_FAILURE_PROB,
) -> TheoreticalPlan:
    """Build the plan for given scales (published ones by default)."""
    d = check_dimension(d)
    if s is None:
        s = published_scales(d)
    if alpha1 is None:
        alpha1 = PUBLISHED_SCALES.get(d, (None, None, 0.5))[2]
    delta = gap_delta(d, s)
    if delta <= 0:
        raise InfeasiblePlanError(
            f"Scales eps1={s.eps1}, eps2={s.eps2} are unusable for d={d} (gap {delta:.6f})."
        )
    rho = rho_for_target(s, delta, failure_prob)
    n_const, n_coeff = plan_terms(d, s, alpha1, rho)
    return TheoreticalPlan(
        d=d,
        scales=s,
        alpha1=alpha1,
        delta=delta,
        rho=rho,
        n_const=n_const,
        n_coeff=n_coeff,
        failure_prob=failure_prob,
    )


class ScaleSearch:
    """
    Exhaustive grid search for the scales and α-split that minimize the
    point bound n_required_tight at the given volume.

    The radial integrals only depend on one scale at a time, so they are
    computed once per grid value; the (eps2, α) plane for each eps1 is then
    evaluated with numpy.
    """

    def __init__(
        self,
        d: int,
        vol: float,
        grid_step: float = DEFAULT_GRID_STEP,
        alpha_step: float = DEFAULT_ALPHA_STEP,
        failure_prob: float = DEFAULT_FAILURE_PROB,
        eps_values: Optional[np.ndarray] = None,
        alpha_values: Optional[np.ndarray] = None,
    ):
        self.d = check_dimension(d)
        if vol <= 0:
            raise ValueError("vol must be positive.")
        if grid_step <= 0 or alpha_step <= 0:
            raise ValueError("grid_step and alpha_step must be positive.")
        self.vol = float(vol)
        self.failure_prob = failure_prob
        limit = max_eps1(self.d)
        if eps_values is not None:
            self.eps_values = np.unique(np.asarray(eps_values, dtype=float))
            if self.eps_values[0] <= 0 or self.eps_values[-1] >= limit:
                raise ValueError(f"Scale grid must lie in (0, {limit:g}) for d={self.d}.")
        else:
            self.eps_values = self._grid(grid_step, limit)
        self.alpha_values = (
            np.asarray(alpha_values, dtype=float)
            if alpha_values is not None
            else self._grid(alpha_step, 1.0)
        )

    @staticmethod
    def _grid(step: float, limit: float) -> np.ndarray:
        count = int(math.floor(limit / step + 1e-9))
        values = np.round(np.arange(1, count + 1) * step, 10)
        return values[values < limit]

    def _precompute(self):
        d = self.d
        eps = self.eps_values
        cvs = np.array([cv(d, e) for e in eps])
        crs = np.array([cr(d, e) for e in eps])
        if d == 1:
            return cvs, crs, None, None
        upper_top = np.array(
            [integral_sinh_pow(d, 2.0 * math.sqrt(2.0) * math.asin(e / 2.0)) for e in eps]
        )
        upper_bottom = np.array([integral_sinh_pow(d, math.sqrt(2.0) * e) for e in eps])
        return cvs, crs, upper_top, upper_bottom

    def _deltas_for_row(self, i: int, upper_top, upper_bottom) -> np.ndarray:
        """Gap Δ for eps1 = eps_values[i] against every smaller eps2."""
        d = self.d
        eps1 = self.eps_values[i]
        eps2 = self.eps_values[:i]
        log_ratio = np.log(eps1 / eps2)
        if d == 1:
            lower = eps1 / eps2
            upper = 1.0 + 2.0 * np.arcsin((eps1 - eps2) / 2.0) / eps2
        else:
            chord = 2.0 * np.arcsin(eps2 / 2.0)
            lower = (eps1 / chord) * (math.sin(eps1) / np.sin(chord)) ** (d - 1)
            upper = upper_top[i] / upper_bottom[:i]
        lower = np.maximum(lower, 1.0)
        upper = np.maximum(upper, lower)
        return np.minimum(
            d + 0.5 - np.log(upper) / log_ratio,
            np.log(lower) / log_ratio - (d - 0.5),
        )

    def _is_better(self, candidate: Tuple, current: Optional[Tuple]) -> bool:
        """Lower n first, then lexicographically smaller (eps1, eps2, alpha1)."""
        if current is None:
            return True
        return candidate < current

    def run(self) -> TheoreticalPlan:
        log.info(
            "=== Starting ScaleSearch d=%d vol=%.6g (%d scales x %d alphas) ===",
            self.d,
            self.vol,
            len(self.eps_values),
            len(self.alpha_values),
        )
        cvs, crs, upper_top, upper_bottom = self._precompute()
        alphas = self.alpha_values[np.newaxis, :]
        best: Optional[Tuple] = None

        for i in range(1, len(self.eps_values)):
            deltas = self._deltas_for_row(i, upper_top, upper_bottom)
            feasible = np.nonzero(deltas > 0)[0]
            if feasible.size == 0:
                continue
            ratio = self.eps_values[feasible] / self.eps_values[i]
            rho = (self.failure_prob * (1.0 - ratio ** (deltas[feasible] / 2.0)) ** 2)[:, np.newaxis]
            a1 = alphas * rho
            a2 = (1.0 - alphas) * rho
            cr2 = crs[feasible][:, np.newaxis]
            cv2 = cvs[feasible][:, np.newaxis]
            n_first = 1.0 + (crs[i] - 1.0) ** 2 / a1 + np.sqrt(2.0 * self.vol / (a1 * cvs[i]))
            n_second = 1.0 + (cr2 - 1.0) ** 2 / a2 + np.sqrt(2.0 * self.vol / (a2 * cv2))
            n_total = np.maximum(n_first, n_second)
            # argmin returns the first minimum in row-major order: smallest eps2, then alpha
            flat = int(np.argmin(n_total))
            j, k = divmod(flat, n_total.shape[1])
            candidate = (
                float(n_total[j, k]),
                float(self.eps_values[i]),
                float(self.eps_values[feasible[j]]),
                float(self.alpha_values[k]),
            )
            if self._is_better(candidate, best):
                best = candidate

        if best is None:
            raise InfeasiblePlanError(f"No feasible scales on the grid for d={self.d}.")

        n_best, eps1, eps2, alpha1 = best
        plan = theoretical_plan(self.d, ScalePair(eps1, eps2), alpha1, self.failure_prob)
        log.info(
            "Best scales d=%d: eps1=%.2f eps2=%.2f alpha1=%.2f n=%.1f",
            self.d,
            eps1,
            eps2,
            alpha1,
            n_best,
        )
        return plan


def scale_search(
    d: int,
    vol: float,
    grid_step: float = DEFAULT_GRID_STEP,
    alpha_step: float = DEFAULT_ALPHA_STEP,
    failure_prob: float = DEFAULT_FAILURE_PROB,
) -> TheoreticalPlan:
    return ScaleSearch(d, vol, grid_step, alpha_step, failure_prob).run()


# ---------------------------------------------------------------------------
# Heuristic binomial plan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeuristicPlan:
    d: int
    scales: ScalePair
    confidence: float
    N_pairs: int
    mean_Ed: float
    sigma_d: float
    gap_d: float


def heuristic_stats(d: float, s: ScalePair) -> Tuple[float, float, float]:
    """
    (E_d, σ_d, gap_d) of the binomial model. d may be fractional.
    """
    if d < 1:
        raise ValueError(f"d must be at least 1 (got {d}).")
    mean = s.ratio ** d
    sigma = math.sqrt(mean - mean * mean)
    gap = min(s.ratio ** (d - 0.5) - mean, mean - s.ratio ** (d + 0.5))
    return mean, sigma, gap


def z_for_confidence(confidence: float) -> float:
    """One-sided normal quantile (1.2816 for 0.9)."""
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1) (got {confidence}).")
    return float(stats.norm.ppf(confidence))


def pairs_required_clt(d: int, s: ScalePair, z: float = CLT_Z_90) -> int:
    if z <= 0:
        raise ValueError(f"z must be positive (got {z}).")
    _mean, sigma, gap = heuristic_stats(d, s)
    return max(1, math.ceil((z * sigma / gap) ** 2))


def success_probability(d: int, s: ScalePair, n_pairs) -> np.ndarray:
    """
    P(the rounded slope equals d) when N pairs are available, Z ~ Bin(N, E_d).

    Success means E_{d+1/2}·N <= Z <= E_{d-1/2}·N (boundaries count as success).
    """
    n_pairs = np.atleast_1d(np.asarray(n_pairs, dtype=np.int64))
    mean = s.ratio ** d
    k_low = np.ceil(s.ratio ** (d + 0.5) * n_pairs)
    k_high = np.floor(s.ratio ** (d - 0.5) * n_pairs)
    prob = stats.binom.cdf(k_high, n_pairs, mean) - stats.binom.cdf(k_low - 1, n_pairs, mean)
    return np.where(k_high >= k_low, prob, 0.0)


def pairs_required_exact(d: int, s: ScalePair, confidence: float) -> int:
    """
    Smallest N from which on every pair budget reaches the confidence.

    The success probability is not monotone in N (the acceptance window
    jumps by whole counts), so the answer is one past the last failing N.
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1) (got {confidence}).")
    clt = pairs_required_clt(d, s, z_for_confidence(confidence))
    horizon = max(4 * clt, 200)
    budgets = np.arange(1, horizon + 1)
    probs = success_probability(d, s, budgets)
    failing = np.nonzero(probs < confidence)[0]
    if failing.size == 0:
        return 1
    last = int(budgets[failing[-1]])
    if last == horizon:
        raise ValueError(f"Confidence {confidence} not reached within {horizon} pairs.")
    return last + 1


def heuristic_plan(
    d: int, confidence: float = 0.9, s: Optional[ScalePair] = None
) -> HeuristicPlan:
    d = check_dimension(d)
    if s is None:
        s = published_scales(d)
    mean, sigma, gap = heuristic_stats(d, s)
    return HeuristicPlan(
        d=d,
        scales=s,
        confidence=confidence,
        N_pairs=pairs_required_exact(d, s, confidence),
        mean_Ed=mean,
        sigma_d=sigma,
        gap_d=gap,
    )


def points_for_pairs(N: int, d: int, eps1: float, vol: float) -> int:
    """
    Number of points expected to give N pairs at eps1.

    Solves n(n-1)/2 · V(eps1)/vol = N and rounds the positive root.
    """
    if N <= 0 or eps1 <= 0 or vol <= 0:
        raise ValueError("N, eps1 and vol must be positive.")
    pair_fraction = euclidean_ball_volume(d, eps1) / vol
    root = (1.0 + math.sqrt(1.0 + 8.0 * N / pair_fraction)) / 2.0
    return max(2, int(math.floor(root + 0.5)))


def heuristic_point_coefficients(d: int, N: Optional[int] = None) -> float:
    """c(d) with n ≈ c(d)·sqrt(vol) for large volumes, at the 90% pair budget."""
    s = published_scales(d)
    if N is None:
        N = pairs_required_exact(d, s, 0.9)
    return math.sqrt(2.0 * N / euclidean_ball_volume(d, s.eps1))


def heuristic_points(d: int, vol: float) -> int:
    """Fixed point count from the tabulated (rounded up) coefficient."""
    if vol <= 0:
        raise ValueError("vol must be positive.")
    coefficient = math.ceil(heuristic_point_coefficients(d))
    return math.ceil(coefficient * math.sqrt(vol))

