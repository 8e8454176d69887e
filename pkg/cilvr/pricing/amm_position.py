"""
Value, delta and gamma of constant-product liquidity positions and their
instantaneous loss-versus-rebalancing (LVR) rate.

Prices S are quoted in token1 per token0, values in token1 and deltas in units of
token0. The LVR rate is reported as a positive cost, 1/2 sigma^2 S^2 |Gamma(S)|.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .base import DomainError, as_output, as_price_array, check_positive
from .ci_option import MarketParams

ArrayLike = Union[float, np.ndarray]


class Position(ABC):
    """
    Common interface of positions that can be hedged and accumulate LVR.

    Subclasses implement value, delta and the curvature (gamma with zeros where the
    position is linear) together with the open price interval where the curvature
    does not vanish.
    """

    @abstractmethod
    def value(self, S: ArrayLike) -> ArrayLike:
        pass

    @abstractmethod
    def delta(self, S: ArrayLike) -> ArrayLike:
        pass

    @abstractmethod
    def curvature(self, S: ArrayLike) -> ArrayLike:
        pass

    @property
    @abstractmethod
    def support(self) -> Tuple[float, float]:
        pass

    def _check_support(self, arr: np.ndarray):
        lo, hi = self.support
        if not np.all((arr > lo) & (arr < hi)):
            raise DomainError(f"gamma is only defined inside ({lo}, {hi})")

    def gamma(self, S: ArrayLike) -> ArrayLike:
        """
        Second derivative of the value.

        :raises: DomainError at or outside the band edges where gamma jumps to zero.
        """
        self._check_support(as_price_array(S))
        return self.curvature(S)

    def lvr_rate(self, params: MarketParams, S: ArrayLike, clip: bool = False) -> ArrayLike:
        """
        Instantaneous LVR rate 1/2 sigma^2 S^2 |Gamma(S)| in token1 per year.

        :param params: Market parameters, only sigma enters.
        :param S: Spot price(s).
        :param clip: Return zero outside the band instead of raising.

        :raises: DomainError outside the band unless `clip` is set.
        """
        arr = as_price_array(S)
        if not clip:
            self._check_support(arr)
        values = 0.5 * params.sigma**2 * arr**2 * np.abs(np.asarray(self.curvature(arr)))
        return as_output(values, S)


@dataclass(frozen=True)
class LiquidityBand(Position):
    """
    Concentrated liquidity with invariant parameter k on the price band [a, b].

    Below a the reserves are all token0, above b all token1.
    """

    a: float
    b: float
    k: float

    def __post_init__(self):
        check_positive("a", self.a)
        check_positive("k", self.k)
        if not self.b > self.a:
            raise DomainError(f"upper bound b={self.b!r} has to exceed a={self.a!r}")

    @classmethod
    def normalized(cls, a: float, b: float) -> "LiquidityBand":
        """Band holding exactly one unit of token0 at the lower bound, X(a) = 1."""
        check_positive("a", a)
        if not b > a:
            raise DomainError(f"upper bound b={b!r} has to exceed a={a!r}")
        return cls(a=a, b=b, k=1.0 / (1.0 / np.sqrt(a) - 1.0 / np.sqrt(b)))

    @property
    def support(self) -> Tuple[float, float]:
        return self.a, self.b

    @property
    def token0_at_lower(self) -> float:
        return self.k * (1.0 / np.sqrt(self.a) - 1.0 / np.sqrt(self.b))

    def value(self, S: ArrayLike) -> ArrayLike:
        arr = as_price_array(S)
        Sc = np.clip(arr, self.a, self.b)
        # k(sqrt(S) - sqrt(a)) + k S (sqrt(b) - sqrt(S)) / sqrt(S b), simplified
        inner = self.k * (2.0 * np.sqrt(Sc) - np.sqrt(self.a) - Sc / np.sqrt(self.b))
        values = np.where(arr < self.a, self.token0_at_lower * arr, inner)
        return as_output(values, S)

    def delta(self, S: ArrayLike) -> ArrayLike:
        arr = as_price_array(S)
        Sc = np.clip(arr, self.a, self.b)
        return as_output(self.k * (1.0 / np.sqrt(Sc) - 1.0 / np.sqrt(self.b)), S)

    def curvature(self, S: ArrayLike) -> ArrayLike:
        arr = as_price_array(S)
        inside = (arr > self.a) & (arr < self.b)
        return as_output(np.where(inside, -0.5 * self.k / arr**1.5, 0.0), S)


@dataclass(frozen=True)
class ConstantProductPosition(Position):
    """Full-range constant-product position, V = 2 k sqrt(S)."""

    k: float

    def __post_init__(self):
        check_positive("k", self.k)

    @property
    def support(self) -> Tuple[float, float]:
        return 0.0, np.inf

    def value(self, S: ArrayLike) -> ArrayLike:
        return as_output(2.0 * self.k * np.sqrt(as_price_array(S)), S)

    def delta(self, S: ArrayLike) -> ArrayLike:
        return as_output(self.k / np.sqrt(as_price_array(S)), S)

    def curvature(self, S: ArrayLike) -> ArrayLike:
        return as_output(-0.5 * self.k / as_price_array(S) ** 1.5, S)


def value(band: Position, S: ArrayLike) -> ArrayLike:
    return band.value(S)


def delta(band: Position, S: ArrayLike) -> ArrayLike:
    return band.delta(S)


def gamma(band: Position, S: ArrayLike) -> ArrayLike:
    return band.gamma(S)


def lvr_rate(band: Position, params: MarketParams, S: ArrayLike, clip: bool = False) -> ArrayLike:
    return band.lvr_rate(params, S, clip=clip)
