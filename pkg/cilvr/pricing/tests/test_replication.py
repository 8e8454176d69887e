"""
Tests for pricing.replication module
"""

import unittest

import numpy as np
import pytest

from numpy.testing import assert_allclose, assert_array_equal

from cilvr.pricing import replication
from cilvr.pricing.amm_position import LiquidityBand
from cilvr.pricing.base import AdmissibilityError, ConfigError, DomainError
from cilvr.pricing.ci_option import MarketParams, ci_boundaries


class TestUniformStrip(unittest.TestCase):
    def setUp(self):
        self.band = LiquidityBand.normalized(80.0, 125.0)
        self.params = MarketParams(r=0.01, sigma=0.25)

    def test_edges(self):
        edges = replication.strike_edges(self.band, 1.0)
        assert edges[0] == 80.0 and edges[-1] == 125.0
        assert len(edges) == 46
        edges = replication.strike_edges(self.band, 4.0)
        # last interval truncated at b
        assert_allclose(np.diff(edges)[:-1], 4.0)
        assert edges[-1] - edges[-2] == pytest.approx(1.0)
        with pytest.raises(DomainError):
            replication.strike_edges(self.band, 0.0)

    def test_weights(self):
        strip = replication.build_uniform_strip(self.band, self.params, 1000.0, 1.0)
        assert len(strip) == 45
        assert strip.weight_sum == pytest.approx(-1.0, abs=1e-12)
        assert np.all(strip.weights < 0.0)
        assert_array_equal(strip.strikes, np.arange(80.0, 125.0))

    def test_far_from_band(self):
        strip = replication.build_uniform_strip(self.band, self.params, 1000.0, 1.0)
        # every put exercised below the band, every put dropped above it
        assert strip.delta(50.0) == pytest.approx(1.0, abs=1e-12)
        assert strip.delta(300.0) == 0.0
        assert strip.value(300.0) == 0.0
        assert_allclose(replication.strip_delta(strip, np.array([50.0])), [1.0])

    def test_value_matches_puts(self):
        strip = replication.build_uniform_strip(self.band, self.params, 500.0, 2.0)
        S = np.linspace(70.0, 130.0, 61)
        expected = sum(w * np.asarray(s.price(S)) for w, s in zip(strip.weights, strip.solutions))
        assert_allclose(replication.strip_value(strip, S), expected, atol=1e-10)
        expected = sum(w * np.asarray(s.delta(S)) for w, s in zip(strip.weights, strip.solutions))
        assert_allclose(strip.delta(S), expected, atol=1e-12)

    def test_error_grows_with_spacing(self):
        errors = []
        for dK in (0.5, 1.0, 2.0):
            strip = replication.build_uniform_strip(self.band, self.params, 1000.0, dK)
            errors.append(replication.replication_errors(self.band, strip, 2000))
        assert errors[0][0] < errors[1][0] < errors[2][0]
        assert errors[0][1] < errors[1][1] < errors[2][1]
        for max_abs, rmse in errors:
            assert rmse <= max_abs

    def test_admissibility(self):
        with pytest.raises(AdmissibilityError):
            replication.build_uniform_strip(self.band, self.params, 1.2, 1.0)


class TestChainedStrip(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.band = LiquidityBand.normalized(80.0, 125.0)
        cls.params = MarketParams(r=0.01, sigma=0.25)
        cls.strip = replication.build_chained_strip(cls.band, cls.params, 1000.0)

    def test_tiling(self):
        strip = self.strip
        assert strip.lower[0] == self.band.a
        assert_array_equal(strip.lower[1:], strip.upper[:-1])
        assert strip.upper[-1] >= self.band.b
        assert strip.overshoot == pytest.approx(strip.upper[-1] - self.band.b)
        assert np.all(np.diff(strip.strikes) > 0.0)
        assert strip.weight_sum == pytest.approx(-1.0, abs=1e-12)

    def test_boundaries_of_strikes(self):
        lower, upper = ci_boundaries(self.params, self.strip.strikes[3], 1000.0)
        assert lower == pytest.approx(self.strip.lower[3], rel=1e-10)
        assert upper == pytest.approx(self.strip.upper[3], rel=1e-10)

    def test_number_of_strikes(self):
        # band widths sigma^2 K^2 / 2q integrate to 2q/sigma^2 (1/a - 1/b) strikes
        expected = 2 * 1000.0 / 0.25**2 * (1 / 80.0 - 1 / 125.0)
        assert len(self.strip) == pytest.approx(expected, rel=0.05)

    def test_activated_index(self):
        strip = self.strip
        S = np.linspace(80.0, 125.0, 5001)
        index = strip.activated_index(S)
        assert np.all(index >= 0)
        assert np.all(strip.lower[index] <= S) and np.all(S <= strip.upper[index])
        assert np.all(np.diff(index) >= 0)
        assert strip.activated_index(79.0) == -1
        assert strip.activated_index(126.0) == -1
        assert strip.activated_index(80.0) == 0
        assert strip.activated_index(float(strip.upper[0])) == 1

    def test_delta_error(self):
        max_abs, rmse = replication.replication_errors(self.band, self.strip, 2000)
        assert max_abs <= np.max(np.abs(self.strip.weights))
        uniform = replication.build_uniform_strip(self.band, self.params, 1000.0, 1.0)
        assert max_abs < replication.replication_errors(self.band, uniform, 2000)[0]
        assert rmse <= max_abs


class TestChainedConvergence(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.band = LiquidityBand.normalized(80.0, 125.0)
        cls.params = MarketParams(r=0.01, sigma=0.25)
        cls.S = np.linspace(80.0, 125.0, 2000)
        cls.strips = {q: replication.build_chained_strip(cls.band, cls.params, q) for q in (1e2, 1e3, 1e4)}

    def errors(self, q):
        return np.abs(self.band.delta(self.S) - self.strips[q].delta(self.S))

    def test_pointwise(self):
        coarse, medium, fine = self.errors(1e2), self.errors(1e3), self.errors(1e4)
        assert coarse.max() > medium.max() > fine.max()
        assert np.mean(fine <= coarse) >= 0.95
        # tile edges are exact, so a few points next to them may not improve
        assert np.mean(medium <= coarse) >= 0.9
        assert np.mean(fine <= medium) >= 0.9

    def test_weight_limit(self):
        # w_j q tends to sigma^2 K^2 X'(K) / 2, the last band is cut at b
        deviations = []
        for q in (1e3, 1e4):
            strip = self.strips[q]
            K = strip.strikes[:-1]
            limit = 0.5 * self.params.sigma**2 * K**2 * self.band.curvature(K)
            deviations.append(np.max(np.abs(strip.weights[:-1] * q / limit - 1.0)))
        assert deviations[1] < deviations[0]
        assert deviations[1] < 1e-2


class TestSweep(unittest.TestCase):
    def setUp(self):
        self.cfg = replication.default_sweep_config(q_values=(4000.0, 1000.0), dK_values=(2.0, 1.0), grid_size=400)

    def test_defaults(self):
        cfg = replication.default_sweep_config()
        assert cfg.band.a == 80.0 and cfg.band.b == 125.0
        assert cfg.band.token0_at_lower == pytest.approx(1.0)
        assert cfg.params == MarketParams(r=0.01, sigma=0.25)
        assert len(cfg.q_values) == 10 and len(cfg.dK_values) == 5
        assert cfg.grid_size == 2000

    def test_ordering(self):
        cells = replication.replication_error_sweep(self.cfg, threads=1)
        assert [(c.q, c.dK) for c in cells] == [(1000.0, 1.0), (1000.0, 2.0), (4000.0, 1.0), (4000.0, 2.0)]
        for small, large in ((cells[0], cells[1]), (cells[2], cells[3])):
            assert small.max_abs_err < large.max_abs_err
        for cell in cells:
            assert cell.below_threshold == (max(cell.max_abs_err, cell.rmse) < 1e-3)

    def test_error_rises_with_fee_rate(self):
        # away from small q, the narrower bands make every put delta closer to a step
        cfg = replication.default_sweep_config(q_values=(250.0, 1000.0, 4000.0), dK_values=(1.0, 2.0, 4.0))
        cells = replication.replication_error_sweep(cfg, threads=1)
        for dK in cfg.dK_values:
            rmse = [cell.rmse for cell in cells if cell.dK == dK]
            assert rmse[0] < rmse[1] < rmse[2]

    def test_threads(self):
        single = replication.replication_error_sweep(self.cfg, threads=1)
        parallel = replication.replication_error_sweep(self.cfg, threads=3)
        assert single == parallel

    def test_invalid(self):
        with pytest.raises(ConfigError):
            replication.default_sweep_config(grid_size=1)
        with pytest.raises(ConfigError):
            replication.default_sweep_config(dK_values=(0.0,))
        with pytest.raises(ConfigError):
            replication.default_sweep_config(q_values=())
        with pytest.raises(AdmissibilityError):
            replication.default_sweep_config(q_values=(1.0,))
