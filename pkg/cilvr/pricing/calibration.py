"""
Effective volatility of a perpetual CI contract from an at-the-money implied
volatility term structure.

Total variances iv_i^2 T_i are interpolated linearly in the tenor. The effective
variance v solves the fixed-point equation

    v = tv(tau(v)) / tau(v)

where tau(v) is the mean exit time from the continuation band computed with
volatility sqrt(v). Since f(tau) = tv(tau)/tau is Lipschitz with constant M, the
spread of f over simulated exit times is bounded by M times the spread of the exit
times.
"""

import logging
import math
import warnings

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from scipy import optimize

from . import constants
from .base import AdmissibilityError, BoundsError, CalendarArbitrageWarning, ConvergenceError, DomainError, as_output
from .ci_option import MarketParams
from .horizon import band_exit_time

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True, eq=False)
class IVTermStructure:
    """
    At-the-money implied volatility pillars.

    :param tenors: Strictly ascending tenors in years.
    :param ivs: Annualized implied volatilities, one per tenor.
    """

    tenors: np.ndarray
    ivs: np.ndarray

    def __post_init__(self):
        tenors = np.asarray(self.tenors, dtype=float)
        ivs = np.asarray(self.ivs, dtype=float)
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "ivs", ivs)
        if tenors.ndim != 1 or tenors.shape != ivs.shape:
            raise DomainError("tenors and implied volatilities need matching one dimensional shapes")
        if tenors.size < 2:
            raise DomainError("a term structure needs at least two pillars")
        if not (np.all(np.isfinite(tenors)) and np.all(tenors > 0.0) and np.all(np.diff(tenors) > 0.0)):
            raise DomainError("tenors have to be positive and strictly ascending")
        if not (np.all(np.isfinite(ivs)) and np.all(ivs > 0.0)):
            raise DomainError("implied volatilities have to be positive")
        if np.any(np.diff(self.total_variances) < 0.0):
            warnings.warn(
                "total variance decreases between pillars, the term structure admits calendar arbitrage",
                CalendarArbitrageWarning,
            )

    @classmethod
    def from_days(cls, days: Sequence[float], ivs: Sequence[float]) -> "IVTermStructure":
        return cls(tenors=np.asarray(days, dtype=float) / constants.days_per_year, ivs=ivs)

    @property
    def total_variances(self) -> np.ndarray:
        return self.ivs**2 * self.tenors

    @property
    def slopes(self) -> np.ndarray:
        """Slope m_i of the total variance on each segment."""
        return np.diff(self.total_variances) / np.diff(self.tenors)

    @property
    def pillars(self):
        return list(zip(self.tenors.tolist(), self.ivs.tolist()))


def total_variance(ts: IVTermStructure, tau: ArrayLike) -> ArrayLike:
    """
    Total variance at tenor tau.

    Inside the pillar range the pillar total variances are interpolated linearly,
    outside the nearest pillar volatility is held flat.

    :raises: DomainError if tau <= 0.
    """
    arr = np.asarray(tau, dtype=float)
    if not np.all(arr > 0.0):
        raise DomainError("tenors have to be positive")
    inner = np.interp(arr, ts.tenors, ts.total_variances)
    flat_low = arr * ts.ivs[0] ** 2
    flat_high = arr * ts.ivs[-1] ** 2
    values = np.where(arr < ts.tenors[0], flat_low, np.where(arr > ts.tenors[-1], flat_high, inner))
    return as_output(values, tau)


def implied_variance(ts: IVTermStructure, tau: ArrayLike) -> ArrayLike:
    """
    f(tau) = tv(tau)/tau with the flat extrapolation, f(0) = iv_1^2.
    """
    arr = np.asarray(tau, dtype=float)
    if not np.all(arr >= 0.0):
        raise DomainError("tenors have to be non-negative")
    Tc = np.clip(arr, ts.tenors[0], ts.tenors[-1])
    values = np.interp(Tc, ts.tenors, ts.total_variances) / Tc
    return as_output(values, tau)


def sup_derivative(ts: IVTermStructure, n_grid: int = constants.derivative_grid) -> float:
    """
    M = max over segments of sup |(m_i tau - tv(tau)) / tau^2|.

    Each segment is evaluated on `n_grid` interior points plus both ends, outside the
    pillar range the derivative vanishes.
    """
    M = 0.0
    tv = ts.total_variances
    for T0, T1, tv0, m in zip(ts.tenors[:-1], ts.tenors[1:], tv[:-1], ts.slopes):
        grid = np.linspace(T0, T1, n_grid + 2)
        derivative = (m * grid - (tv0 + m * (grid - T0))) / grid**2
        M = max(M, float(np.max(np.abs(derivative))))
    return M


@dataclass(frozen=True)
class CalibrationStep:
    iteration: int
    variance: float
    tau_bar: float
    mapped_variance: float


@dataclass(frozen=True)
class CalibrationResult:
    sigma_eff: float
    tau_bar: float
    iterations: int
    M: float
    residual: float
    converged_by: str
    r: float
    strike: float
    fee_rate: float
    trace: Tuple[CalibrationStep, ...] = ()
    rmse_bound: Optional[float] = None
    mad_bound: Optional[float] = None


def calibrate_sigma_eff(
    ts: IVTermStructure,
    r: float,
    K: float,
    q: float,
    S0: Optional[float] = None,
    damping: float = constants.calibration_damping,
    tol: float = constants.calibration_tol,
    max_iter: int = constants.calibration_max_iter,
) -> CalibrationResult:
    """
    Solve v = tv(tau(v))/tau(v) for the effective variance v.

    The iteration starts at v = tv(T_1)/T_1 and moves by `damping` times the residual.
    When the residual changes sign without shrinking the iteration is oscillating and
    the root is located by Brent's method inside the bracket found so far.

    :param S0: Start price of the exit problem, at the money by default.

    :raises: AdmissibilityError if q <= r*K, ConvergenceError after `max_iter` iterations.
    """
    if not q > r * K:
        raise AdmissibilityError(f"fee rate q={q!r} has to exceed r*K={r * K!r}")
    if not 0.0 < damping <= 1.0:
        raise DomainError(f"damping has to lie in (0, 1], got {damping!r}")
    M = sup_derivative(ts)

    def mapped(v):
        tau = band_exit_time(MarketParams(r=r, sigma=math.sqrt(v)), K, q, S0)
        return float(implied_variance(ts, tau)), tau

    def result(v, tau, residual, iterations, how, trace):
        logger.info("effective volatility %.6g after %i iterations (%s)", math.sqrt(v), iterations, how)
        return CalibrationResult(
            sigma_eff=math.sqrt(v),
            tau_bar=tau,
            iterations=iterations,
            M=M,
            residual=residual,
            converged_by=how,
            r=r,
            strike=K,
            fee_rate=q,
            trace=tuple(trace),
        )

    v = float(ts.ivs[0] ** 2)
    trace = []
    below, above = None, None
    previous = None
    for iteration in range(1, max_iter + 1):
        fv, tau = mapped(v)
        residual = fv - v
        trace.append(CalibrationStep(iteration, v, tau, fv))
        logger.debug("iteration %i: variance %.12g, exit time %.6g, residual %.3e", iteration, v, tau, residual)
        if abs(residual) <= tol * v:
            return result(v, tau, abs(residual), iteration, "damped", trace)
        if residual > 0.0:
            below = v
        else:
            above = v
        if previous is not None and residual * previous < 0.0 and abs(residual) >= abs(previous):
            lo, hi = sorted((below, above))
            try:
                v, info = optimize.brentq(
                    lambda x: mapped(x)[0] - x,
                    lo,
                    hi,
                    xtol=0.1 * tol * lo,
                    maxiter=max_iter,
                    full_output=True,
                    disp=False,
                )
            except (RuntimeError, ValueError) as e:
                raise ConvergenceError(f"bracketed fixed point search failed: {e}") from e
            fv, tau = mapped(v)
            trace.append(CalibrationStep(iteration + 1, v, tau, fv))
            return result(v, tau, abs(fv - v), iteration + info.iterations, "bracketed", trace)
        previous = residual
        v = v + damping * residual
    raise ConvergenceError(f"fixed point iteration did not converge in {max_iter} iterations")


@dataclass(frozen=True)
class ErrorBounds:
    """
    Lipschitz bounds on the spread of f(tau) = tv(tau)/tau over exit-time samples.

    Empirical errors are measured around f at the sample mean exit time, the first
    order approximation f(tau_bar) of the closed-form exit time and the sample mean of
    f are reported next to each other.
    """

    M: float
    rmse_bound: float
    mad_bound: float
    empirical_rmse: float
    empirical_mad: float
    tau_std: float
    tau_mad: float
    approximation: float
    sample_mean: float

    @property
    def rmse_slack(self) -> float:
        return self.empirical_rmse / self.rmse_bound if self.rmse_bound > 0.0 else 0.0

    @property
    def mad_slack(self) -> float:
        return self.empirical_mad / self.mad_bound if self.mad_bound > 0.0 else 0.0

    @property
    def holds(self) -> bool:
        slack = 1e-12
        return (
            self.empirical_rmse <= self.rmse_bound * (1.0 + slack) + slack
            and self.empirical_mad <= self.mad_bound * (1.0 + slack) + slack
        )


def error_bounds(ts: IVTermStructure, result: CalibrationResult, exit_samples) -> ErrorBounds:
    """
    Compare the RMSE and MAD of f over exit-time samples with M*std(tau) and M*E|tau - mean|.

    :param exit_samples: An ExitSample from the path simulation or an array of exit times.

    :raises: DomainError for an empty sample, BoundsError if an empirical error exceeds its bound.
    """
    times = np.asarray(getattr(exit_samples, "times", exit_samples), dtype=float)
    n = times.size
    if n == 0:
        raise DomainError("error bounds need at least one exit time")
    center = math.fsum(times) / n
    f = np.asarray(implied_variance(ts, times))
    f_center = float(implied_variance(ts, center))
    tau_std = math.sqrt(math.fsum((times - center) ** 2) / n)
    tau_mad = math.fsum(np.abs(times - center)) / n
    bounds = ErrorBounds(
        M=result.M,
        rmse_bound=result.M * tau_std,
        mad_bound=result.M * tau_mad,
        empirical_rmse=math.sqrt(math.fsum((f - f_center) ** 2) / n),
        empirical_mad=math.fsum(np.abs(f - f_center)) / n,
        tau_std=tau_std,
        tau_mad=tau_mad,
        approximation=float(implied_variance(ts, result.tau_bar)),
        sample_mean=math.fsum(f) / n,
    )
    if not bounds.holds:
        raise BoundsError(
            f"empirical RMSE {bounds.empirical_rmse:.3e} and MAD {bounds.empirical_mad:.3e} exceed the bounds "
            f"{bounds.rmse_bound:.3e} and {bounds.mad_bound:.3e} for M={bounds.M:.3e}"
        )
    logger.debug("error bounds hold with slack %.3f (RMSE) and %.3f (MAD)", bounds.rmse_slack, bounds.mad_slack)
    return bounds


def with_bounds(result: CalibrationResult, bounds: ErrorBounds) -> CalibrationResult:
    return replace(result, rmse_bound=bounds.rmse_bound, mad_bound=bounds.mad_bound)
