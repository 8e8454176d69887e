"""
Mean first-exit time of geometric Brownian motion from a price band and the
inversion of fee rate for a target holding horizon.

With x = ln(S0/S_lower), W = ln(S_upper/S_lower), drift a = r - sigma^2/2 and
kappa = -2a/sigma^2 the mean exit time is

    tau = (1/a) [ W (e^(kappa x) - 1) / (e^(kappa W) - 1) - x ]        a != 0
    tau = x (W - x) / sigma^2                                          a == 0
"""

import logging
import math

from dataclasses import dataclass
from typing import Optional

from scipy import optimize

from . import constants
from .base import ConvergenceError, DomainError, NoSolutionError, check_positive
from .ci_option import MarketParams, ci_boundaries

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HorizonInputs:
    """
    Band and start price of a first-exit problem.

    S0 may sit on either edge of the band, the exit time is zero there.
    """

    params: MarketParams
    S0: float
    S_lower: float
    S_upper: float

    def __post_init__(self):
        check_positive("S_lower", self.S_lower)
        if not self.S_upper > self.S_lower:
            raise DomainError(f"S_upper={self.S_upper!r} has to exceed S_lower={self.S_lower!r}")
        if not self.S_lower <= self.S0 <= self.S_upper:
            raise DomainError(f"S0={self.S0!r} lies outside [{self.S_lower!r}, {self.S_upper!r}]")
        if self.params.sigma <= 0.0:
            raise DomainError("the exit time needs a positive volatility")

    @property
    def drift_a(self) -> float:
        return self.params.drift

    @property
    def kappa(self) -> float:
        return -2.0 * self.drift_a / self.params.sigma**2


def _expm1_ratio(kappa: float, x: float, W: float) -> float:
    """(e^(kappa x) - 1) / (e^(kappa W) - 1) for 0 < x < W without overflow."""
    if kappa > 0.0:
        return math.exp(kappa * (x - W)) * math.expm1(-kappa * x) / math.expm1(-kappa * W)
    return math.expm1(kappa * x) / math.expm1(kappa * W)


def mean_exit_time(inp: HorizonInputs) -> float:
    """
    Closed-form mean time (years) until the price leaves (S_lower, S_upper).

    Below a drift of :py:data:`constants.drift_switch` times sigma^2 the zero-drift
    form with its first order correction in the drift replaces the exponential form,
    which would otherwise lose all digits to cancellation.
    """
    x = math.log(inp.S0 / inp.S_lower)
    W = math.log(inp.S_upper / inp.S_lower)
    if x <= 0.0 or x >= W:
        return 0.0
    a = inp.drift_a
    s2 = inp.params.sigma**2
    if abs(a) < constants.drift_switch * s2:
        return x * (W - x) / s2 + 4.0 * a / s2**2 * x * (x**2 / 6.0 + W**2 / 12.0 - x * W / 4.0)
    return (W * _expm1_ratio(inp.kappa, x, W) - x) / a


def band_exit_time(params: MarketParams, K: float, q: float, S0: Optional[float] = None) -> float:
    """
    Mean exit time from the continuation band of the CI put (K, q).

    :param S0: Start price, at the money (S0 = K) by default.
    """
    S_lower, S_upper = ci_boundaries(params, K, q)
    return mean_exit_time(HorizonInputs(params, K if S0 is None else S0, S_lower, S_upper))


def solve_q_for_horizon(
    params: MarketParams,
    K: float,
    target_tau: float,
    S0: Optional[float] = None,
    q_max: Optional[float] = None,
) -> float:
    """
    Fee rate whose continuation band has the mean exit time `target_tau`.

    The mean exit time decreases strictly with q, the root is bracketed between
    r*K*(1+1e-9) and `q_max` (default 1e9*K) and found by bisection in log q.

    :raises: NoSolutionError if the target lies outside the reachable range,
        ConvergenceError if bisection does not reach the tolerance.
    """
    check_positive("target_tau", target_tau)
    params.check_pricing()
    check_positive("K", K)
    log_target = math.log(target_tau)

    start = K if S0 is None else check_positive("S0", S0)

    def objective(log_q):
        try:
            S_lower, S_upper = ci_boundaries(params, K, math.exp(log_q))
        except OverflowError:
            # band so wide that it cannot be represented, the exit time is beyond any target
            return math.inf
        if not S_lower < start < S_upper:
            # the band has shrunk past the start price
            return -math.inf
        tau = mean_exit_time(HorizonInputs(params, start, S_lower, S_upper))
        if tau <= 0.0:
            return -math.inf
        return math.log(tau) - log_target

    lo = math.log(params.r * K * (1.0 + 1e-9))
    hi = math.log(constants.q_max_factor * K if q_max is None else q_max)
    if not hi > lo:
        raise NoSolutionError(f"q_max has to exceed r*K={params.r * K!r}")
    f_lo, f_hi = objective(lo), objective(hi)
    if f_lo <= 0.0 or f_hi >= 0.0:
        raise NoSolutionError(
            f"mean exit time {target_tau!r} is not reachable for q in ({math.exp(lo)!r}, {math.exp(hi)!r})"
        )
    try:
        log_q, info = optimize.bisect(
            objective, lo, hi, xtol=1e-13, maxiter=constants.horizon_max_iter, full_output=True, disp=False
        )
    except RuntimeError as e:
        raise ConvergenceError(f"fee rate inversion failed: {e}") from e
    q = math.exp(log_q)
    tau = band_exit_time(params, K, q, S0)
    if not info.converged or abs(tau / target_tau - 1.0) > constants.horizon_rtol:
        raise ConvergenceError(f"fee rate inversion stopped at q={q!r} with mean exit time {tau!r}")
    logger.debug("q=%g reaches mean exit time %g after %i bisections", q, tau, info.iterations)
    return q
