"""
Tests for pricing.calibration module
"""

import math
import unittest
import warnings

from dataclasses import replace

import numpy as np
import pytest

from numpy.testing import assert_allclose
from scipy import optimize

from cilvr.pricing import calibration, pathwise_sim
from cilvr.pricing.base import (AdmissibilityError, BoundsError, CalendarArbitrageWarning, CensoringWarning,
                               DomainError)
from cilvr.pricing.calibration import IVTermStructure
from cilvr.pricing.ci_option import MarketParams, ci_boundaries
from cilvr.pricing.horizon import band_exit_time


class TestTermStructure(unittest.TestCase):
    def setUp(self):
        self.ts = IVTermStructure.from_days([1, 7, 30, 60], [0.9, 0.8, 0.7, 0.65])

    def test_from_days(self):
        assert_allclose(self.ts.tenors, np.array([1, 7, 30, 60]) / 365.0)
        assert self.ts.pillars[0] == (1 / 365.0, 0.9)

    def test_total_variance(self):
        T, tv = self.ts.tenors, self.ts.total_variances
        assert_allclose(calibration.total_variance(self.ts, T), tv)
        middle = 0.5 * (T[1] + T[2])
        assert calibration.total_variance(self.ts, middle) == pytest.approx(0.5 * (tv[1] + tv[2]))
        # flat volatility beyond the pillars
        assert calibration.total_variance(self.ts, 2 * T[-1]) == pytest.approx(2 * T[-1] * 0.65**2)
        assert calibration.total_variance(self.ts, 0.5 * T[0]) == pytest.approx(0.5 * T[0] * 0.9**2)
        with pytest.raises(DomainError):
            calibration.total_variance(self.ts, 0.0)

    def test_implied_variance(self):
        assert calibration.implied_variance(self.ts, 0.0) == pytest.approx(0.81)
        assert calibration.implied_variance(self.ts, 1.0) == pytest.approx(0.65**2)
        tau = np.linspace(0.001, 0.2, 50)
        assert_allclose(calibration.implied_variance(self.ts, tau), calibration.total_variance(self.ts, tau) / tau)

    def test_sup_derivative(self):
        ts = IVTermStructure([0.1, 0.2], [0.5, 0.6])
        tv0, tv1 = 0.025, 0.072
        m = (tv1 - tv0) / 0.1
        # f' = -(tv0 - m T0) / tau^2 is largest at the left pillar
        assert calibration.sup_derivative(ts) == pytest.approx(abs(tv0 - m * 0.1) / 0.1**2)
        flat = IVTermStructure([0.1, 0.2], [0.5, 0.5])
        assert calibration.sup_derivative(flat) == pytest.approx(0.0, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(DomainError):
            IVTermStructure([0.1], [0.5])
        with pytest.raises(DomainError):
            IVTermStructure([0.2, 0.1], [0.5, 0.5])
        with pytest.raises(DomainError):
            IVTermStructure([0.1, 0.2], [0.5, -0.5])
        with pytest.raises(DomainError):
            IVTermStructure([0.1, 0.2], [0.5])

    def test_calendar_arbitrage(self):
        with pytest.warns(CalendarArbitrageWarning):
            IVTermStructure.from_days([7, 30], [1.0, 0.4])


class TestCalibration(unittest.TestCase):
    def test_flat(self):
        for sigma in (0.3, 0.6, 1.0):
            ts = IVTermStructure.from_days([1, 7, 30, 90], [sigma] * 4)
            result = calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 40.0)
            assert result.sigma_eff == pytest.approx(sigma, rel=1e-12)
            assert result.iterations <= 2
            assert result.converged_by == "damped"

    def test_fixed_point(self):
        ts = IVTermStructure.from_days([1, 7, 30, 60], [0.9, 0.8, 0.7, 0.65])
        result = calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 100.0)
        v = result.sigma_eff**2
        assert result.residual <= 1e-10 * v
        assert float(calibration.implied_variance(ts, result.tau_bar)) == pytest.approx(v, rel=1e-9)
        params = MarketParams(r=0.05, sigma=result.sigma_eff)
        assert band_exit_time(params, 100.0, 100.0) == pytest.approx(result.tau_bar, rel=1e-12)
        assert 0.65 < result.sigma_eff < 0.9
        assert len(result.trace) >= result.iterations or result.converged_by == "bracketed"
        assert result.trace[0].variance == pytest.approx(0.81)
        assert result.M == pytest.approx(calibration.sup_derivative(ts))

    def test_two_pillars(self):
        # between the pillars f(tau) = m + c / tau, so v solves v = m + c / tau(v)
        ts = IVTermStructure.from_days([1, 60], [0.9, 0.6])
        (T0, T1), (tv0, tv1) = ts.tenors, ts.total_variances
        m = (tv1 - tv0) / (T1 - T0)
        c = tv0 - m * T0

        def residual(v):
            return v - m - c / band_exit_time(MarketParams(r=0.05, sigma=math.sqrt(v)), 100.0, 100.0)

        v = optimize.brentq(residual, 0.6**2, 0.9**2, xtol=1e-14)
        result = calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 100.0)
        assert T0 < result.tau_bar < T1
        assert result.sigma_eff**2 == pytest.approx(v, rel=1e-9)
        assert float(calibration.implied_variance(ts, result.tau_bar)) == pytest.approx(m + c / result.tau_bar)
        assert result.M == pytest.approx(abs(c) / T0**2)

    def test_upward_structure(self):
        ts = IVTermStructure.from_days([1, 7, 30, 60], [0.5, 0.6, 0.75, 0.8])
        result = calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 100.0, damping=1.0)
        v = result.sigma_eff**2
        assert abs(float(calibration.implied_variance(ts, result.tau_bar)) - v) <= 1e-9 * v

    def test_invalid(self):
        ts = IVTermStructure.from_days([1, 7], [0.5, 0.6])
        with pytest.raises(AdmissibilityError):
            calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 5.0)
        with pytest.raises(DomainError):
            calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 40.0, damping=0.0)


class TestErrorBounds(unittest.TestCase):
    def test_array_samples(self):
        ts = IVTermStructure.from_days([1, 7, 30, 60], [0.9, 0.8, 0.7, 0.65])
        result = calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 100.0)
        times = np.random.default_rng(3).exponential(result.tau_bar, 500)
        bounds = calibration.error_bounds(ts, result, times)
        assert bounds.holds
        assert bounds.empirical_rmse <= bounds.rmse_bound
        assert bounds.empirical_mad <= bounds.mad_bound
        assert bounds.rmse_slack <= 1.0 and bounds.mad_slack <= 1.0
        assert bounds.tau_std == pytest.approx(np.std(times))
        assert bounds.approximation == pytest.approx(result.sigma_eff**2, rel=1e-9)
        updated = calibration.with_bounds(result, bounds)
        assert updated.rmse_bound == bounds.rmse_bound
        assert updated.mad_bound == bounds.mad_bound
        assert result.rmse_bound is None
        with pytest.raises(DomainError):
            calibration.error_bounds(ts, result, np.array([]))

    def test_underestimated_constant(self):
        ts = IVTermStructure.from_days([1, 7, 30, 60], [0.9, 0.8, 0.7, 0.65])
        result = calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 100.0)
        # next to the first pillar f falls almost as steeply as M allows
        times = np.array([1.0, 2.0]) / 365.0
        assert calibration.error_bounds(ts, result, times).rmse_slack > 0.2
        with pytest.raises(BoundsError):
            calibration.error_bounds(ts, replace(result, M=0.1 * result.M), times)

    def test_simulated_exit_times(self):
        rng = np.random.default_rng(17)
        days = np.array([1.0, 7.0, 14.0, 30.0, 60.0])
        for seed in range(20):
            ivs = np.sort(rng.uniform(0.4, 1.0, days.size))[:: 1 if seed % 2 else -1]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", CalendarArbitrageWarning)
                ts = IVTermStructure.from_days(days, ivs)
            result = calibration.calibrate_sigma_eff(ts, 0.05, 100.0, 200.0)
            params = MarketParams(r=0.05, sigma=result.sigma_eff)
            S_lower, S_upper = ci_boundaries(params, 100.0, 200.0)
            cfg = pathwise_sim.exit_config(params, 100.0, S_lower, S_upper, n_paths=200, seed=seed, dt=1e-4)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", CensoringWarning)
                sample = pathwise_sim.sample_first_exit(params, 100.0, S_lower, S_upper, cfg, bridge_correction=True)
            bounds = calibration.error_bounds(ts, result, sample)
            assert bounds.holds
            assert math.isfinite(bounds.sample_mean)
