"""
Strips of short CI puts that replicate the delta of a liquidity band.

Two discretizations are provided:

* :py:func:`build_uniform_strip` places strikes on a uniform grid K_i = a + i*dK with
  the weight w_i = X(K_{i+1}) - X(K_i) of each strike interval.
* :py:func:`build_chained_strip` chooses the strikes so that the continuation bands
  tile [a, b], S_lower(K_{i+1}) = S_upper(K_i), with w_i = X(S_upper_i) - X(S_lower_i).

In both cases the weights telescope to X(b) - X(a), which is -1 for a band
normalized to hold one unit of token0 at its lower bound.
"""

import logging
import math

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional, Tuple, Union

import numpy as np

from scipy import optimize

from . import constants
from .amm_position import LiquidityBand
from .base import (AdmissibilityError, ConfigError, ConvergenceError, TilingError, as_output, as_price_array,
                   check_positive, resolve_threads)
from .ci_option import CIPutSolution, CIPutSpec, MarketParams, ci_boundaries, solve_ci_put

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class StrikeStrip:
    """
    Weighted strikes of a uniform-strike strip.

    The per-strike continuation bounds are stored as arrays so that the strip delta
    can be evaluated for all strikes at once; gamma_p does not depend on the strike.
    """

    band: LiquidityBand
    params: MarketParams
    fee_rate: float
    strikes: np.ndarray
    weights: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    solutions: Tuple[CIPutSolution, ...] = field(repr=False)

    def __len__(self):
        return len(self.strikes)

    @property
    def weight_sum(self) -> float:
        return math.fsum(self.weights)

    def _evaluate(self, S: ArrayLike, which: str) -> ArrayLike:
        arr = as_price_array(S)
        flat = arr.reshape(-1)
        lower, upper = self.lower[:, None], self.upper[:, None]
        alpha = np.array([s.alpha_p for s in self.solutions])[:, None]
        gamma_p = -2.0 * self.params.r / self.params.sigma**2
        Sc = np.clip(flat[None, :], lower, upper)
        rho = np.log(Sc / upper)
        if which == "delta":
            inner = np.clip(-alpha * np.expm1((gamma_p - 1.0) * rho), -1.0, 0.0)
            below = -1.0
        else:
            inner = alpha * (Sc - upper) - (alpha * upper / gamma_p) * np.expm1(gamma_p * rho)
            below = self.strikes[:, None] - flat[None, :]
        per_strike = np.where(flat[None, :] <= lower, below, np.where(flat[None, :] >= upper, 0.0, inner))
        values = (self.weights @ per_strike).reshape(arr.shape)
        return as_output(values, S)

    def delta(self, S: ArrayLike) -> ArrayLike:
        """Delta of the strip, sum of w_i X_q(S; K_i) with each term clipped outside its band."""
        return self._evaluate(S, "delta")

    def value(self, S: ArrayLike) -> ArrayLike:
        """Value of the strip, sum of w_i P_q(S; K_i)."""
        return self._evaluate(S, "value")


@dataclass(frozen=True, eq=False)
class ChainedStrip(StrikeStrip):
    """
    Strip whose continuation bands tile the liquidity band without gaps.

    The last band generally ends above b, the excess is kept as `overshoot`.
    """

    overshoot: float = 0.0

    def activated_index(self, S: ArrayLike) -> Union[int, np.ndarray]:
        """
        Index of the strike whose continuation band contains S, -1 outside [a, b].

        At a shared boundary the strike of the upper band is reported.

        :raises: TilingError if a price inside [a, b] is not covered by any band.
        """
        arr = np.asarray(S, dtype=float)
        lower, upper = self.lower, self.upper
        index = np.searchsorted(lower, arr, side="right") - 1
        in_band = (arr >= self.band.a) & (arr <= self.band.b)
        safe = np.clip(index, 0, len(lower) - 1)
        covered = (index >= 0) & (arr >= lower[safe]) & (arr <= upper[safe])
        if np.any(in_band & ~covered):
            raise TilingError("price inside the band is not covered by any continuation band")
        index = np.where(in_band, safe, -1)
        return int(index) if np.ndim(S) == 0 else index


@dataclass(frozen=True)
class SweepConfig:
    band: LiquidityBand
    params: MarketParams
    q_values: Tuple[float, ...] = constants.sweep_q_values
    dK_values: Tuple[float, ...] = constants.sweep_dK_values
    grid_size: int = constants.sweep_grid_size

    def __post_init__(self):
        if self.grid_size < 2:
            raise ConfigError("the error grid needs at least two points")
        if not self.q_values or not self.dK_values:
            raise ConfigError("the sweep needs at least one fee rate and one strike spacing")
        for dK in self.dK_values:
            check_positive("dK", dK, ConfigError)
        for q in self.q_values:
            if not q > self.params.r * self.band.b:
                raise AdmissibilityError(f"fee rate q={q!r} has to exceed r*b={self.params.r * self.band.b!r}")


@dataclass(frozen=True)
class SweepCell:
    q: float
    dK: float
    max_abs_err: float
    rmse: float
    below_threshold: bool


def strike_edges(band: LiquidityBand, dK: float) -> np.ndarray:
    """Interval edges a, a+dK, ... with the last interval truncated at b."""
    check_positive("dK", dK)
    n = max(1, math.ceil((band.b - band.a) / dK - 1e-9))
    return np.append(band.a + dK * np.arange(n), band.b)


def build_uniform_strip(band: LiquidityBand, params: MarketParams, q: float, dK: float) -> StrikeStrip:
    """
    Uniform-strike strip with one short CI put per strike interval.

    :raises: AdmissibilityError if q <= r*b.
    """
    if not q > params.r * band.b:
        raise AdmissibilityError(f"fee rate q={q!r} has to exceed r*b={params.r * band.b!r}")
    edges = strike_edges(band, dK)
    weights = np.diff(band.delta(edges))
    strikes = edges[:-1]
    solutions = tuple(solve_ci_put(params, CIPutSpec(K, q)) for K in strikes)
    return StrikeStrip(
        band=band,
        params=params,
        fee_rate=q,
        strikes=strikes,
        weights=weights,
        lower=np.array([s.S_lower for s in solutions]),
        upper=np.array([s.S_upper for s in solutions]),
        solutions=solutions,
    )


def _strike_for_lower_boundary(params: MarketParams, q: float, target: float) -> float:
    """
    Strike K with S_lower(q; K) = target.

    S_lower increases with K and lies below K, so the root sits above the target; the
    upper end of the bracket grows until it passes the root or hits the admissible
    limit q/r.
    """
    K_limit = q / params.r

    def residual(K):
        return ci_boundaries(params, K, q)[0] - target

    step = 0.01 * target
    hi = target + step
    while True:
        if hi >= K_limit:
            hi = K_limit * (1.0 - 1e-12)
            if residual(hi) < 0.0:
                raise ConvergenceError(f"no admissible strike has the lower boundary {target!r} at q={q!r}")
            break
        if residual(hi) >= 0.0:
            break
        step *= constants.strike_bracket_growth
        hi = target + step
    try:
        K, info = optimize.brentq(
            residual,
            target,
            hi,
            xtol=constants.strike_xtol * target,
            maxiter=constants.strike_max_iter,
            full_output=True,
            disp=False,
        )
    except (RuntimeError, ValueError) as e:
        raise ConvergenceError(f"strike search for lower boundary {target!r} failed: {e}") from e
    if not info.converged:
        raise ConvergenceError(f"strike search for lower boundary {target!r} did not converge")
    return K


def build_chained_strip(
    band: LiquidityBand, params: MarketParams, q: float, max_strikes: int = 10_000_000
) -> ChainedStrip:
    """
    Strip whose continuation bands tile [a, b], one activated strike at every price.

    :raises: AdmissibilityError if q does not admit a strike near a, ConvergenceError if a
        strike search fails.
    """
    params.check_pricing()
    if not q > params.r * band.a:
        raise AdmissibilityError(f"fee rate q={q!r} has to exceed r*a={params.r * band.a!r}")
    solutions: List[CIPutSolution] = []
    target = band.a
    while True:
        if len(solutions) >= max_strikes:
            raise ConvergenceError(f"more than {max_strikes} strikes needed to tile the band")
        K = _strike_for_lower_boundary(params, q, target)
        sol = solve_ci_put(params, CIPutSpec(K, q))
        solutions.append(sol)
        if sol.S_upper >= band.b:
            break
        target = sol.S_upper

    lower = np.array([s.S_lower for s in solutions])
    upper = np.array([s.S_upper for s in solutions])
    # the first band starts at a, all later ones start at the end of their predecessor
    lower[0] = band.a
    lower[1:] = upper[:-1]
    weights = band.delta(upper) - band.delta(lower)
    logger.info("chained strip at q=%g uses %i strikes, overshoot %.3g", q, len(solutions), upper[-1] - band.b)
    return ChainedStrip(
        band=band,
        params=params,
        fee_rate=q,
        strikes=np.array([s.strike for s in solutions]),
        weights=weights,
        lower=lower,
        upper=upper,
        solutions=tuple(solutions),
        overshoot=float(upper[-1] - band.b),
    )


def strip_delta(strip: StrikeStrip, S: ArrayLike) -> ArrayLike:
    return strip.delta(S)


def strip_value(strip: StrikeStrip, S: ArrayLike) -> ArrayLike:
    return strip.value(S)


def replication_errors(band: LiquidityBand, strip: StrikeStrip, grid_size: int) -> Tuple[float, float]:
    """Maximum absolute and root-mean-square delta error on a uniform grid over [a, b]."""
    S = np.linspace(band.a, band.b, grid_size)
    err = np.abs(band.delta(S) - strip.delta(S))
    return float(err.max()), math.sqrt(math.fsum(err**2) / err.size)


def _sweep_cell(cfg: SweepConfig, q: float, dK: float) -> SweepCell:
    strip = build_uniform_strip(cfg.band, cfg.params, q, dK)
    max_abs, rmse = replication_errors(cfg.band, strip, cfg.grid_size)
    logger.debug("sweep cell q=%g dK=%g: max %.3e rmse %.3e", q, dK, max_abs, rmse)
    return SweepCell(
        q=q,
        dK=dK,
        max_abs_err=max_abs,
        rmse=rmse,
        below_threshold=bool(max(max_abs, rmse) < constants.sweep_error_level),
    )


def replication_error_sweep(cfg: SweepConfig, threads: Optional[int] = None) -> List[SweepCell]:
    """
    Delta replication errors of uniform strips for every (q, dK) pair.

    Cells are evaluated concurrently and returned ordered by q, then dK.
    """
    cells = list(product(sorted(cfg.q_values), sorted(cfg.dK_values)))
    workers = resolve_threads(threads)
    if workers == 1:
        return [_sweep_cell(cfg, q, dK) for q, dK in cells]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda cell: _sweep_cell(cfg, *cell), cells))


def default_sweep_config(**overrides) -> SweepConfig:
    """Reference sweep, band [80, 125] holding one token0 at 80."""
    options = dict(
        band=LiquidityBand.normalized(*constants.sweep_band),
        params=MarketParams(r=constants.sweep_r, sigma=constants.sweep_sigma),
    )
    options.update(overrides)
    return SweepConfig(**options)
