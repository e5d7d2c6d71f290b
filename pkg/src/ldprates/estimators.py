"""Estimators operating on binary private outputs.

Two estimators are provided: the (optionally projected) sample mean of the
private outputs, and a binary-search estimator that locates theta on a grid
of spacing ``delta`` by a cascade of likelihood-ratio threshold tests.  For
binary outputs every test thresholds the same statistic
``T(z) = (1 + mean(z)/z0)/2``, so the cascade collapses to a lookup of ``T``
in a partition of [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EstimatorError(ValueError):
    pass


@dataclass(frozen=True)
class ThetaRange:
    """Closed range [m_minus, m_plus] of the functional over the model."""

    m_minus: float
    m_plus: float

    def __post_init__(self):
        if not (math.isfinite(self.m_minus) and math.isfinite(self.m_plus)):
            raise EstimatorError("range endpoints must be finite")
        if not self.m_minus < self.m_plus:
            raise EstimatorError("need m_minus < m_plus")

    @property
    def width(self) -> float:
        return self.m_plus - self.m_minus

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.m_minus + self.m_plus)

    def project(self, x):
        return np.clip(x, self.m_minus, self.m_plus)


@dataclass(frozen=True)
class LinearProbMap:
    """Success probability p(theta) = (1 + (theta - offset)/z0)/2.

    This is the probability of the output ``z0`` when the representer has
    mean ``theta - offset`` (zero bias after the shift).  Other models can
    supply any object with ``prob``, ``theta_at`` and ``z0``.
    """

    z0: float
    offset: float = 0.0

    def prob(self, theta):
        return 0.5 * (1.0 + (np.asarray(theta, dtype=float) - self.offset) / self.z0)

    def theta_at(self, t):
        """Inverse of ``prob``."""
        return self.offset + self.z0 * (2.0 * np.asarray(t, dtype=float) - 1.0)


def sample_mean_estimate(z, shift: float = 0.0, range: ThetaRange | None = None) -> float:
    """mean(z) + shift, projected onto ``range`` when one is given."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise EstimatorError("empty sample")
    est = float(z.mean()) + shift
    return float(range.project(est)) if range is not None else est


def critical_value_G(s: float, t: float) -> float:
    """Threshold of the likelihood-ratio test between Bernoulli(s) and Bernoulli(t).

    G(s, t) = log((1-s)/(1-t)) / log((t/s)(1-s)/(1-t)), with G(s, s) = s.
    """
    if not (0 < s < 1 and 0 < t < 1):
        raise EstimatorError(f"arguments must lie in (0, 1), got ({s}, {t})")
    if s == t:
        return float(s)
    if abs(t - s) < 1e-7:
        # symmetric with G(s, s) = s, so the midpoint is accurate to O((t-s)^2)
        return 0.5 * (s + t)
    num = math.log1p(-s) - math.log1p(-t)
    den = math.log(t) - math.log(s) + num
    return num / den


@dataclass(frozen=True)
class BinarySearchPlan:
    delta: float
    N: int
    range: ThetaRange
    map: LinearProbMap
    critical: np.ndarray

    @property
    def degenerate(self) -> bool:
        return self.N <= 2

    @property
    def values(self) -> np.ndarray:
        """Possible outputs M_- + j*delta, j = 1..N-1."""
        if self.degenerate:
            return np.array([self.range.midpoint])
        return self.range.m_minus + self.delta * np.arange(1, self.N)


def grid_size(delta: float, width: float) -> int:
    """Smallest integer N with N * delta > width."""
    N = int(math.floor(width / delta)) + 1
    while N * delta <= width:
        N += 1
    while N > 1 and (N - 1) * delta > width:
        N -= 1
    return N


def build_plan(delta: float, range: ThetaRange, map: LinearProbMap) -> BinarySearchPlan:
    if not delta >= 0:
        raise EstimatorError("delta must be non-negative")
    if delta == 0:
        return BinarySearchPlan(0.0, 1, range, map, np.array([]))
    N = grid_size(delta, range.width)
    if N <= 2:
        return BinarySearchPlan(float(delta), N, range, map, np.array([]))
    j = np.arange(1, N - 1)
    a = range.m_minus + j * delta
    b = range.m_minus + (j + 1) * delta
    pa = np.asarray(map.prob(a), dtype=float)
    pb = np.asarray(map.prob(b), dtype=float)
    if np.any(pb <= pa):
        raise EstimatorError("probability map is not strictly increasing on the grid")
    c = np.array([critical_value_G(s, t) for s, t in zip(pa, pb)])
    if np.any(np.diff(c) < 0):
        raise EstimatorError("critical values are not monotone")
    return BinarySearchPlan(float(delta), N, range, map, c)


def test_statistic(zbar, z0: float):
    """T = (1 + zbar/z0)/2, the fraction of outputs equal to z0."""
    return 0.5 * (1.0 + np.asarray(zbar, dtype=float) / z0)


def binary_search_from_mean(zbar, plan: BinarySearchPlan):
    """Binary-search estimate as a function of the output mean (vectorized)."""
    zbar = np.asarray(zbar, dtype=float)
    if plan.degenerate:
        return np.full(zbar.shape, plan.range.midpoint)[()]
    T = test_statistic(zbar, plan.map.z0)
    # cells [c_{j-1}, c_j): ties go right, as the tests decide H1 on T >= c
    j = np.searchsorted(plan.critical, T, side="right") + 1
    return (plan.range.m_minus + j * plan.delta)[()]


def binary_search_estimate(z, plan: BinarySearchPlan) -> float:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise EstimatorError("empty sample")
    z0 = plan.map.z0
    if np.any(np.abs(np.abs(z) - z0) > 1e-12 * z0):
        raise EstimatorError("outputs must take the values +-z0")
    return float(binary_search_from_mean(z.mean(), plan))


@dataclass(frozen=True)
class AffineSurrogate:
    """g(zbar) = intercept + slope * zbar, within ``bound`` of the search estimate."""

    slope: float
    intercept: float
    bound: float
    range: ThetaRange

    def __call__(self, zbar):
        return self.intercept + self.slope * np.asarray(zbar, dtype=float)

    def projected(self, zbar):
        return self.range.project(self(zbar))


def affine_surrogate(plan: BinarySearchPlan) -> AffineSurrogate:
    """Affine function of the output mean tracking the binary-search estimate.

    psi interpolates phi(t) = clip(p^-1(t)) at one point below the first
    critical value and one above the last; composing with T gives g.
    """
    if plan.degenerate or plan.N < 4:
        raise EstimatorError("affine surrogate needs a plan with N >= 4")
    rng = plan.range
    p_lo = float(plan.map.prob(rng.m_minus))
    p_hi = float(plan.map.prob(rng.m_plus))
    s0 = 0.5 * (p_lo + plan.critical[0])
    t0 = 0.5 * (plan.critical[-1] + p_hi)
    phi = lambda t: float(rng.project(plan.map.theta_at(t)))
    slope_t = (phi(t0) - phi(s0)) / (t0 - s0)
    # psi(T) with T = 1/2 + zbar/(2 z0)
    z0 = plan.map.z0
    intercept = phi(s0) + (0.5 - s0) * slope_t
    return AffineSurrogate(slope_t / (2.0 * z0), intercept, 2.0 * plan.delta, rng)


def delta_tuning(modulus_at_root_n: float, a_loss: float) -> float:
    """delta = C^2 * modulus with the smallest admissible C = sqrt(2 log 2a) + 1."""
    if not a_loss > 1:
        raise EstimatorError("the loss doubling constant must exceed 1")
    if modulus_at_root_n < 0:
        raise EstimatorError("modulus must be non-negative")
    C = math.sqrt(2.0 * math.log(2.0 * a_loss)) + 1.0
    return C * C * modulus_at_root_n
