"""
Tests for pricing.horizon module
"""

import math
import unittest

import numpy as np
import pytest

from cilvr.pricing import horizon
from cilvr.pricing.base import DomainError, NoSolutionError
from cilvr.pricing.ci_option import MarketParams, ci_boundaries
from cilvr.pricing.horizon import HorizonInputs, mean_exit_time


class TestMeanExitTime(unittest.TestCase):
    def setUp(self):
        self.params = MarketParams(r=0.05, sigma=0.5)
        self.S_lower, self.S_upper = ci_boundaries(self.params, 100.0, 40.0)

    def test_band_example(self):
        tau = mean_exit_time(HorizonInputs(self.params, 100.0, self.S_lower, self.S_upper))
        assert tau == pytest.approx(0.0864, abs=5e-4)
        assert horizon.band_exit_time(self.params, 100.0, 40.0) == tau

    def test_generator_equation(self):
        # 1/2 sigma^2 tau'' + a tau' = -1 in x = ln(S/S_lower)
        params = self.params
        W = math.log(self.S_upper / self.S_lower)
        h = 1e-4
        a = params.drift
        for x in np.linspace(0.1 * W, 0.9 * W, 7):

            def tau(y):
                return mean_exit_time(HorizonInputs(params, self.S_lower * math.exp(y), self.S_lower, self.S_upper))

            second = (tau(x + h) - 2 * tau(x) + tau(x - h)) / h**2
            first = (tau(x + h) - tau(x - h)) / (2 * h)
            assert 0.5 * params.sigma**2 * second + a * first == pytest.approx(-1.0, abs=1e-4)

    def test_edges(self):
        assert mean_exit_time(HorizonInputs(self.params, self.S_lower, self.S_lower, self.S_upper)) == 0.0
        assert mean_exit_time(HorizonInputs(self.params, self.S_upper, self.S_lower, self.S_upper)) == 0.0
        with pytest.raises(DomainError):
            HorizonInputs(self.params, 50.0, self.S_lower, self.S_upper)
        with pytest.raises(DomainError):
            HorizonInputs(self.params, 100.0, 110.0, 90.0)
        with pytest.raises(DomainError):
            HorizonInputs(MarketParams(r=0.05, sigma=0.0), 100.0, 90.0, 110.0)

    def test_zero_drift(self):
        params = MarketParams(r=0.02, sigma=0.2)
        inp = HorizonInputs(params, 100.0, 80.0, 125.0)
        assert abs(inp.drift_a) < 1e-8 * params.sigma**2
        x, W = math.log(100.0 / 80.0), math.log(125.0 / 80.0)
        assert mean_exit_time(inp) == pytest.approx(x * (W - x) / params.sigma**2, rel=1e-12)

    def test_branch_switch(self):
        sigma = 0.3
        x, W = math.log(100.0 / 80.0), math.log(125.0 / 80.0)
        zero_drift = x * (W - x) / sigma**2
        for ratio in (-3e-8, -1e-8, -0.5e-8, 0.5e-8, 1e-8, 3e-8):
            # a = ratio * sigma^2 on both sides of the switch
            params = MarketParams(r=0.5 * sigma**2 + ratio * sigma**2, sigma=sigma)
            tau = mean_exit_time(HorizonInputs(params, 100.0, 80.0, 125.0))
            assert tau == pytest.approx(zero_drift, rel=1e-6)

    def test_extreme_drift(self):
        # kappa W far beyond the exponent range of doubles
        params = MarketParams(r=2.0, sigma=0.05)
        inp = HorizonInputs(params, 100.0, 10.0, 1e6)
        tau = mean_exit_time(inp)
        assert math.isfinite(tau)
        assert tau == pytest.approx(math.log(1e6 / 100.0) / params.drift, rel=1e-6)

    def test_decreasing_in_fee(self):
        taus = [horizon.band_exit_time(self.params, 100.0, q) for q in (10.0, 40.0, 160.0, 640.0)]
        assert all(t1 > t2 for t1, t2 in zip(taus[:-1], taus[1:]))


class TestFeeInversion(unittest.TestCase):
    def setUp(self):
        self.params = MarketParams(r=0.05, sigma=0.5)

    def test_round_trip(self):
        tau = horizon.band_exit_time(self.params, 100.0, 40.0)
        q = horizon.solve_q_for_horizon(self.params, 100.0, tau)
        assert q == pytest.approx(40.0, rel=1e-5)
        assert horizon.band_exit_time(self.params, 100.0, q) == pytest.approx(tau, rel=1e-6)

    def test_off_center(self):
        q = horizon.solve_q_for_horizon(self.params, 100.0, 7.0 / 365.0, S0=101.0)
        assert horizon.band_exit_time(self.params, 100.0, q, S0=101.0) == pytest.approx(7.0 / 365.0, rel=1e-6)

    def test_unreachable(self):
        with pytest.raises(NoSolutionError):
            horizon.solve_q_for_horizon(self.params, 100.0, 1e6)
        with pytest.raises(NoSolutionError):
            horizon.solve_q_for_horizon(self.params, 100.0, 0.01, q_max=1.0)
        with pytest.raises(DomainError):
            horizon.solve_q_for_horizon(self.params, 100.0, 0.0)
