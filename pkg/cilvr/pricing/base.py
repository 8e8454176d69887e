"""
Exceptions, warnings and small helpers shared by the pricing modules.
"""

import os

from typing import Optional, Union

import numpy as np

THREADS_ENV = "CI_LVR_THREADS"


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""

    pass


class AdmissibilityError(ValueError):
    """The fee rate does not exceed r*K, so no finite continuation band exists."""

    pass


class NoSolutionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


class HorizonError(RuntimeError):
    pass


class TilingError(RuntimeError):
    pass


class BoundsError(RuntimeError):
    """Empirical calibration errors exceed their Lipschitz bounds, M is underestimated."""

    pass


class CalendarArbitrageWarning(RuntimeWarning):
    pass


class CensoringWarning(RuntimeWarning):
    pass


class OutOfRangeWarning(RuntimeWarning):
    pass


def check_positive(name: str, value: float, error=DomainError) -> float:
    """
    Validate a strictly positive finite scalar.

    :param name: Name used in the error message.
    :param value: The value to check.
    :param error: Exception class raised on failure.

    :return: The value as float.
    """
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise error(f"{name} has to be a positive finite number, got {value!r}")
    return value


def as_price_array(S: Union[float, np.ndarray]) -> np.ndarray:
    """
    Convert a price argument to a float array and reject S <= 0.

    :raises: DomainError if any price is not strictly positive.
    """
    arr = np.asarray(S, dtype=float)
    if not np.all(arr > 0.0):
        raise DomainError("prices have to be strictly positive")
    return arr


def as_output(values: np.ndarray, like) -> Union[float, np.ndarray]:
    """Return a python float for scalar input, the array otherwise."""
    if np.ndim(like) == 0:
        return float(values)
    return values


def resolve_threads(threads: Optional[int] = None) -> int:
    """
    Number of worker threads to use.

    An explicit value takes precedence over the environment variable
    :code:`CI_LVR_THREADS`, the default is a single thread.

    :raises: ConfigError for values that are not positive integers.
    """
    if threads is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} has to be a positive integer, got {raw!r}") from None
    if int(threads) != threads or threads < 1:
        raise ConfigError(f"thread count has to be a positive integer, got {threads!r}")
    return int(threads)
