"""
Perpetual American put with continuous installments (CI put).

The holder pays the fee rate q for as long as the contract is kept alive and may
exercise (receive K - S) or drop it at any time. Inside the continuation band
(S_lower, S_upper) the value solves

    1/2 sigma^2 S^2 P'' + r S P' - r P = q

with value-matching and smooth fit at both boundaries. The solution is

    P(S) = alpha_p S + beta_p S^gamma_p - q/r,    gamma_p = -2 r / sigma^2

which is evaluated here relative to the upper boundary, using alpha_p S_upper = c with
c = q / (r + sigma^2/2). This keeps the evaluation accurate for very large fee rates,
where the band shrinks around the strike.
"""

import math

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from scipy.linalg import solve_banded

from . import constants
from .base import AdmissibilityError, DomainError, as_output, as_price_array, check_positive

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class MarketParams:
    """
    Constant risk-free rate and volatility of the geometric Brownian motion.

    The value object itself accepts r = 0 and sigma = 0 so that degenerate paths can be
    simulated, the pricing functions require both to be strictly positive.
    """

    r: float
    sigma: float

    def __post_init__(self):
        for name in ("r", "sigma"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise DomainError(f"{name} has to be a non-negative finite number, got {value!r}")

    @property
    def drift(self) -> float:
        """Log-price drift r - sigma^2/2."""
        return self.r - 0.5 * self.sigma**2

    def check_pricing(self):
        """
        :raises: DomainError if the closed form is not defined for these parameters.
        """
        if self.sigma <= 0.0:
            raise DomainError(f"sigma has to be positive for pricing, got {self.sigma!r}")
        if self.r <= 0.0:
            raise DomainError("r = 0 has no finite continuation band, use a positive rate")


@dataclass(frozen=True)
class CIPutSpec:
    strike: float
    fee_rate: float

    def __post_init__(self):
        check_positive("strike", self.strike)
        check_positive("fee_rate", self.fee_rate)

    def is_admissible(self, params: MarketParams) -> bool:
        """Only fee rates above r*K lead to a finite continuation band."""
        return self.fee_rate > params.r * self.strike


@dataclass(frozen=True)
class CIPutSolution:
    """
    Coefficients and boundaries of a solved CI put.

    price, delta and gamma are clipped outside the continuation band to the
    exercised (K - S, -1, 0) or dropped (0, 0, 0) values.
    """

    params: MarketParams
    spec: CIPutSpec
    alpha_p: float
    beta_p: float
    gamma_p: float
    g: float
    S_lower: float
    S_upper: float
    width: float

    @property
    def strike(self) -> float:
        return self.spec.strike

    @property
    def fee_rate(self) -> float:
        return self.spec.fee_rate

    def _log_ratio(self, S: np.ndarray) -> np.ndarray:
        return np.log(S / self.S_upper)

    def continuation_price(self, S: ArrayLike) -> ArrayLike:
        """Analytic continuation of the interior solution, without clipping."""
        arr = as_price_array(S)
        c = self.alpha_p * self.S_upper
        rho = self._log_ratio(arr)
        values = self.alpha_p * (arr - self.S_upper) - (c / self.gamma_p) * np.expm1(self.gamma_p * rho)
        return as_output(values, S)

    def continuation_delta(self, S: ArrayLike) -> ArrayLike:
        arr = as_price_array(S)
        values = -self.alpha_p * np.expm1((self.gamma_p - 1.0) * self._log_ratio(arr))
        return as_output(values, S)

    def continuation_gamma(self, S: ArrayLike) -> ArrayLike:
        arr = as_price_array(S)
        values = (1.0 - self.gamma_p) * (self.alpha_p / arr) * np.exp((self.gamma_p - 1.0) * self._log_ratio(arr))
        return as_output(values, S)

    def price(self, S: ArrayLike) -> ArrayLike:
        arr = as_price_array(S)
        inner = np.asarray(self.continuation_price(np.clip(arr, self.S_lower, self.S_upper)))
        values = np.where(arr <= self.S_lower, self.strike - arr, np.where(arr >= self.S_upper, 0.0, inner))
        return as_output(values, S)

    def delta(self, S: ArrayLike) -> ArrayLike:
        arr = as_price_array(S)
        inner = np.asarray(self.continuation_delta(np.clip(arr, self.S_lower, self.S_upper)))
        # rounding can push the interior formula a hair outside [-1, 0]
        inner = np.clip(inner, -1.0, 0.0)
        values = np.where(arr <= self.S_lower, -1.0, np.where(arr >= self.S_upper, 0.0, inner))
        return as_output(values, S)

    def gamma(self, S: ArrayLike) -> ArrayLike:
        """Second price derivative, zero outside the continuation band."""
        arr = as_price_array(S)
        inner = np.asarray(self.continuation_gamma(np.clip(arr, self.S_lower, self.S_upper)))
        inside = (arr > self.S_lower) & (arr < self.S_upper)
        return as_output(np.where(inside, inner, 0.0), S)

    def contains(self, S: ArrayLike) -> Union[bool, np.ndarray]:
        arr = np.asarray(S, dtype=float)
        inside = (arr >= self.S_lower) & (arr <= self.S_upper)
        return bool(inside) if np.ndim(S) == 0 else inside


def _band_terms(r: float, sigma: float, K: float, q: float) -> Tuple[float, float, float, float, float]:
    """
    Return (gamma_p, c, S_lower, S_upper, width) for an admissible contract.

    With eps = rK/q and g = 1 + eps the boundaries are c (g - g^(1/gamma)) and
    c (g^(1-1/gamma) - 1), both evaluated through log1p/expm1.
    """
    gamma_p = -2.0 * r / sigma**2
    c = q / (r + 0.5 * sigma**2)
    eps = r * K / q
    L = math.log1p(eps)
    upper_term = math.expm1((1.0 - 1.0 / gamma_p) * L)
    lower_term = eps - math.expm1(L / gamma_p)
    width = c * (upper_term - eps + math.expm1(L / gamma_p))
    return gamma_p, c, c * lower_term, c * upper_term, width


def _check_contract(params: MarketParams, K: float, q: float):
    params.check_pricing()
    if not q > params.r * K:
        raise AdmissibilityError(f"fee rate q={q!r} has to exceed r*K={params.r * K!r}")


def ci_boundaries(params: MarketParams, K: float, q: float) -> Tuple[float, float]:
    """
    Continuation band (S_lower, S_upper) of the contract (K, q).

    Scalar fast path used when strikes are searched for a given boundary.
    """
    _check_contract(params, K, q)
    _, _, S_lower, S_upper, _ = _band_terms(params.r, params.sigma, K, q)
    return S_lower, S_upper


def solve_ci_put(params: MarketParams, spec: CIPutSpec) -> CIPutSolution:
    """
    Solve the perpetual CI put in closed form.

    :param params: Market parameters, r > 0 and sigma > 0.
    :param spec: Strike and fee rate of the contract.

    :return: Coefficients and continuation band.

    :raises: AdmissibilityError if q <= r*K, DomainError if r or sigma are not positive.
    """
    K, q = spec.strike, spec.fee_rate
    _check_contract(params, K, q)
    gamma_p, c, S_lower, S_upper, width = _band_terms(params.r, params.sigma, K, q)
    alpha_p = c / S_upper
    with np.errstate(over="ignore"):
        # only reported, the evaluation never uses beta_p directly
        beta_p = float(-(c / gamma_p) * np.exp(-gamma_p * np.log(S_upper)))
    return CIPutSolution(
        params=params,
        spec=spec,
        alpha_p=alpha_p,
        beta_p=beta_p,
        gamma_p=gamma_p,
        g=1.0 + params.r * K / q,
        S_lower=S_lower,
        S_upper=S_upper,
        width=width,
    )


def price(sol: CIPutSolution, S: ArrayLike) -> ArrayLike:
    return sol.price(S)


def delta(sol: CIPutSolution, S: ArrayLike) -> ArrayLike:
    return sol.delta(S)


def ode_residual(sol: CIPutSolution, S: ArrayLike) -> ArrayLike:
    """
    Residual 1/2 sigma^2 S^2 P'' + r S P' - r P - q of the interior solution.
    """
    arr = as_price_array(S)
    r, sigma = sol.params.r, sol.params.sigma
    values = (
        0.5 * sigma**2 * arr**2 * np.asarray(sol.continuation_gamma(arr))
        + r * arr * np.asarray(sol.continuation_delta(arr))
        - r * np.asarray(sol.continuation_price(arr))
        - sol.fee_rate
    )
    return as_output(values, S)


def band_width_limit(params: MarketParams, K: float, q_sequence: Sequence[float]) -> List[float]:
    """
    Scaled band widths q*(S_upper - S_lower) for an ascending sequence of fee rates.

    The sequence converges to sigma^2 K^2 / 2 with a deviation of order 1/q.

    :raises: DomainError if the fee rates are not strictly ascending.
    """
    qs = [float(q) for q in q_sequence]
    if any(q1 >= q2 for q1, q2 in zip(qs[:-1], qs[1:])):
        raise DomainError("fee rates have to be strictly ascending")
    output = []
    for q in qs:
        _check_contract(params, K, q)
        output.append(q * _band_terms(params.r, params.sigma, K, q)[4])
    return output


def solve_ode_fd(
    params: MarketParams, spec: CIPutSpec, n_nodes: int = constants.fd_nodes
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Finite-difference solution of the CI put ODE on the closed-form band.

    Central second-order differences on a uniform grid between S_lower and S_upper with
    Dirichlet data P(S_lower) = K - S_lower and P(S_upper) = 0. The tridiagonal system is
    solved with :py:func:`scipy.linalg.solve_banded`.

    :return: Grid nodes and the solution at those nodes, boundaries included.
    """
    if n_nodes < 3:
        raise DomainError("the grid needs at least one interior node")
    sol = solve_ci_put(params, spec)
    r, sigma, q = params.r, params.sigma, spec.fee_rate
    S = np.linspace(sol.S_lower, sol.S_upper, int(n_nodes))
    h = S[1] - S[0]
    Si = S[1:-1]
    diffusion = 0.5 * sigma**2 * Si**2 / h**2
    advection = r * Si / (2.0 * h)
    lower = diffusion - advection
    diag = -2.0 * diffusion - r
    upper = diffusion + advection

    rhs = np.full(Si.shape, q)
    P_left = spec.strike - sol.S_lower
    rhs[0] -= lower[0] * P_left
    # P(S_upper) = 0 adds nothing to the last row

    ab = np.zeros((3, Si.size))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = diag
    ab[2, :-1] = lower[1:]
    interior = solve_banded((1, 1), ab, rhs)
    return S, np.concatenate(([P_left], interior, [0.0]))
