import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import ldprates.estimators as est
from ldprates.estimators import (
    EstimatorError,
    LinearProbMap,
    ThetaRange,
    affine_surrogate,
    binary_search_estimate,
    binary_search_from_mean,
    build_plan,
    critical_value_G,
    delta_tuning,
    grid_size,
    sample_mean_estimate,
)


def G_oracle(s, t):
    # plain form, no log1p
    return math.log((1 - s) / (1 - t)) / math.log(t * (1 - s) / (s * (1 - t)))


def stepwise_search(k, n, plan):
    """Oracle: bisection over the grid, each step a likelihood-ratio test on the count k."""
    N, d, lo_t = plan.N, plan.delta, plan.range.m_minus
    lo, hi = 1, N - 1
    while lo < hi:
        mid = (lo + hi) // 2
        pa = float(plan.map.prob(lo_t + mid * d))
        pb = float(plan.map.prob(lo_t + (mid + 1) * d))
        llr = k * math.log(pb / pa) + (n - k) * math.log((1 - pb) / (1 - pa))
        if llr >= 0:
            lo = mid + 1
        else:
            hi = mid
    return lo_t + lo * d, llr if N > 2 else None


class TestCriticalValue:
    def test_examples(self):
        assert critical_value_G(0.25, 0.75) == 0.5
        assert critical_value_G(0.2, 0.4) == pytest.approx(0.293305, abs=1e-6)
        assert critical_value_G(0.3, 0.3) == 0.3
        with pytest.raises(EstimatorError):
            critical_value_G(0.0, 0.5)

    @given(st.floats(0.01, 0.98), st.floats(1e-4, 0.5))
    def test_between_and_oracle(self, s, gap):
        t = min(s + gap, 0.99)
        if t <= s:
            return
        g = critical_value_G(s, t)
        assert s < g < t
        assert g == pytest.approx(G_oracle(s, t), rel=1e-9)

    def test_continuity_near_diagonal(self):
        s = 0.37
        for h in (1e-6, 1e-7, 1e-8, 1e-10):
            assert abs(critical_value_G(s, s + h) - (s + h / 2)) < 1e-9


class TestPlan:
    def test_grid_size(self):
        assert grid_size(0.2, 1.0) == 6
        assert grid_size(0.25, 1.0) == 5
        assert grid_size(0.6, 1.0) == 2
        assert grid_size(2.0, 1.0) == 1

    def test_degenerate_midpoint(self):
        plan = build_plan(0.6, ThetaRange(0.0, 1.0), LinearProbMap(2.0))
        assert plan.N == 2 and plan.degenerate
        assert binary_search_estimate(np.array([2.0, -2.0, 2.0]), plan) == 0.5
        assert build_plan(0.0, ThetaRange(0.0, 1.0), LinearProbMap(2.0)).degenerate

    def test_six_cells(self):
        plan = build_plan(0.2, ThetaRange(0.0, 1.0), LinearProbMap(2.0))
        assert plan.N == 6 and len(plan.critical) == 4
        assert np.allclose(plan.values, [0.2, 0.4, 0.6, 0.8, 1.0])
        assert np.all(np.diff(plan.critical) > 0)
        # all-plus sample maps to the top, all-minus to the bottom
        assert binary_search_estimate(np.full(10, 2.0), plan) == pytest.approx(1.0)
        assert binary_search_estimate(np.full(10, -2.0), plan) == pytest.approx(0.2)

    def test_rejects_non_binary_outputs(self):
        plan = build_plan(0.2, ThetaRange(0.0, 1.0), LinearProbMap(2.0))
        with pytest.raises(EstimatorError):
            binary_search_estimate(np.array([2.0, 1.0]), plan)

    def test_statistic(self):
        assert est.test_statistic(0.0, 2.0) == 0.5
        assert est.test_statistic(2.0, 2.0) == 1.0

    def test_matches_stepwise_oracle(self):
        rng = np.random.default_rng(3)
        checked = 0
        for _ in range(1000):
            lo = rng.uniform(-1, 0.5)
            width = rng.uniform(0.2, 1.5)
            z0 = rng.uniform(width + abs(lo) + abs(lo + width), 6.0)
            delta = width / rng.uniform(2.5, 40)
            plan = build_plan(delta, ThetaRange(lo, lo + width), LinearProbMap(z0))
            n = int(rng.integers(1, 400))
            k = int(rng.integers(0, n + 1))
            expect, llr = stepwise_search(k, n, plan)
            if llr is not None and abs(llr) < 1e-9:
                continue  # exact tie, decided by rounding
            zbar = z0 * (2 * k - n) / n
            assert binary_search_from_mean(zbar, plan) == pytest.approx(expect, abs=1e-12)
            checked += 1
        assert checked > 950


class TestSurrogate:
    @pytest.mark.parametrize("delta", [0.05, 0.1, 0.2, 0.3])
    @pytest.mark.parametrize("z0", [2.0, 5.0])
    def test_exhaustive_small_n(self, delta, z0):
        plan = build_plan(delta, ThetaRange(0.0, 1.0), LinearProbMap(z0))
        g = affine_surrogate(plan)
        assert g.bound == 2 * delta
        for n in range(1, 13):
            zbar = z0 * (2 * np.arange(n + 1) - n) / n
            bs = binary_search_from_mean(zbar, plan)
            assert np.all(np.abs(g.projected(zbar) - bs) <= g.bound + 1e-12)

    def test_needs_four_cells(self):
        plan = build_plan(0.4, ThetaRange(0.0, 1.0), LinearProbMap(2.0))
        with pytest.raises(EstimatorError):
            affine_surrogate(plan)


class TestSampleMean:
    def test_shift_and_projection(self):
        z = np.array([2.0, -2.0, 2.0, 2.0])
        assert sample_mean_estimate(z) == 1.0
        assert sample_mean_estimate(z, shift=0.5) == 1.5
        assert sample_mean_estimate(z, shift=0.5, range=ThetaRange(0.0, 1.0)) == 1.0
        with pytest.raises(EstimatorError):
            sample_mean_estimate([])


def test_delta_tuning():
    assert delta_tuning(1.0, 2.25) == pytest.approx((math.sqrt(2 * math.log(4.5)) + 1) ** 2)
    assert math.sqrt(delta_tuning(1.0, 2.25)) == pytest.approx(2.7345, abs=1e-4)
    assert delta_tuning(0.0, 2.0) == 0.0
    with pytest.raises(EstimatorError):
        delta_tuning(1.0, 1.0)
