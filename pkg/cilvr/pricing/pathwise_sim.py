"""
Geometric Brownian motion paths, LVR and funding-fee ledgers and first-exit sampling.

Every path draws from its own generator seeded with (seed, path index), so results do
not depend on how paths are distributed over worker threads. Prices follow the
exact log-normal step

    S_{t+dt} = S_t exp((r - sigma^2/2) dt + sigma sqrt(dt) Z)

under the risk-neutral drift r.
"""

import logging
import math
import warnings

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

from . import constants
from .amm_position import Position
from .base import CensoringWarning, ConfigError, DomainError, HorizonError, check_positive, resolve_threads
from .ci_option import MarketParams
from .horizon import HorizonInputs, mean_exit_time
from .replication import ChainedStrip

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = ("t", "S", "V", "W", "LVR", "Fee", "j")


@dataclass(frozen=True)
class GBMConfig:
    params: MarketParams
    S0: float
    dt: float
    horizon: float
    seed: int = 0
    n_paths: int = 1

    def __post_init__(self):
        check_positive("S0", self.S0, ConfigError)
        check_positive("dt", self.dt, ConfigError)
        check_positive("horizon", self.horizon, ConfigError)
        if self.horizon < self.dt * (1.0 - 1e-12):
            raise ConfigError(f"horizon {self.horizon!r} is shorter than one step {self.dt!r}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths has to be a positive integer, got {self.n_paths!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed has to be a non-negative integer, got {self.seed!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator of path `index`."""
    return np.random.default_rng([int(seed), int(index)])


def _for_each_chunk(n_paths: int, threads: Optional[int], work: Callable[[np.ndarray], None]):
    workers = min(resolve_threads(threads), n_paths)
    chunks = np.array_split(np.arange(n_paths), workers)
    if workers == 1:
        work(chunks[0])
        return
    with ThreadPoolExecutor(max_workers=workers) as executor:
        # list() re-raises exceptions of the workers
        list(executor.map(work, chunks))


@dataclass(frozen=True, eq=False)
class PathSet:
    config: GBMConfig
    times: np.ndarray
    prices: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]


def simulate_paths(cfg: GBMConfig, threads: Optional[int] = None) -> PathSet:
    """
    Simulate `cfg.n_paths` price paths on the grid 0, dt, ..., n_steps*dt.

    :return: Times and an array of prices with one row per path.
    """
    n_steps = cfg.n_steps
    drift = cfg.params.drift * cfg.dt
    vol = cfg.params.sigma * math.sqrt(cfg.dt)
    log_prices = np.empty((cfg.n_paths, n_steps + 1))
    log_prices[:, 0] = math.log(cfg.S0)

    def work(indices):
        for i in indices:
            z = path_rng(cfg.seed, i).standard_normal(n_steps)
            log_prices[i, 1:] = log_prices[i, 0] + np.cumsum(drift + vol * z)

    _for_each_chunk(cfg.n_paths, threads, work)
    return PathSet(config=cfg, times=cfg.dt * np.arange(n_steps + 1), prices=np.exp(log_prices))


@dataclass(frozen=True, eq=False)
class FundingSeries:
    fee: np.ndarray
    active: np.ndarray


@dataclass(frozen=True, eq=False)
class PathLedger:
    """
    Per-step ledger of hedged positions, one row per path.

    `lvr` is the positive cost W - V of the position against its self-financing hedge,
    `analytic_lvr` accumulates the instantaneous rate 1/2 sigma^2 S^2 |Gamma| at the left
    end of each step.
    """

    times: np.ndarray
    prices: np.ndarray
    value: np.ndarray
    hedge: np.ndarray
    lvr: np.ndarray
    analytic_lvr: np.ndarray
    fee: Optional[np.ndarray] = None
    active: Optional[np.ndarray] = None

    def attach_funding(self, funding: FundingSeries) -> "PathLedger":
        if funding.fee.shape != self.prices.shape:
            raise DomainError("funding series and ledger cover different paths")
        return replace(self, fee=funding.fee, active=funding.active)

    def path_table(self, path: int = 0) -> Tuple[Tuple[str, ...], np.ndarray]:
        """
        Columns t, S, V, W, LVR, Fee, j of one path.

        Fee and j are zero and -1 when no funding series is attached.
        """
        n = self.times.size
        fee = np.zeros(n) if self.fee is None else self.fee[path]
        active = -np.ones(n) if self.active is None else self.active[path]
        data = np.column_stack(
            [self.times, self.prices[path], self.value[path], self.hedge[path], self.lvr[path], fee, active]
        )
        return LEDGER_COLUMNS, data


def accumulate_lvr(position: Position, paths: PathSet) -> PathLedger:
    """
    Hedge the position along every path and accumulate its LVR.

    The hedge starts at V(S_0) and holds X(S_t) units of token0 over each step,
    dW = X(S_t) (S_{t+dt} - S_t).
    """
    S = paths.prices
    V = np.asarray(position.value(S))
    X = np.asarray(position.delta(S[:, :-1]))
    hedge = np.empty_like(S)
    hedge[:, 0] = V[:, 0]
    hedge[:, 1:] = V[:, :1] + np.cumsum(X * np.diff(S, axis=1), axis=1)
    rate = np.asarray(position.lvr_rate(paths.config.params, S[:, :-1], clip=True))
    analytic = np.zeros_like(S)
    analytic[:, 1:] = np.cumsum(rate * paths.config.dt, axis=1)
    return PathLedger(
        times=paths.times,
        prices=S,
        value=V,
        hedge=hedge,
        lvr=hedge - V,
        analytic_lvr=analytic,
    )


def accumulate_funding(strip: ChainedStrip, paths: PathSet) -> FundingSeries:
    """
    Funding income of the chained strip along every path.

    While S_t lies in [a, b] the activated strike j accrues |w_j| q dt, outside the band
    nothing accrues.

    :raises: TilingError if an in-band price is not covered by a continuation band.
    """
    active = np.asarray(strip.activated_index(paths.prices))
    left = active[:, :-1]
    income = np.abs(strip.weights)[np.maximum(left, 0)] * strip.fee_rate
    rate = np.where(left >= 0, income, 0.0)
    fee = np.zeros_like(paths.prices)
    fee[:, 1:] = np.cumsum(rate * paths.config.dt, axis=1)
    return FundingSeries(fee=fee, active=active)


@dataclass(frozen=True)
class FundingSummary:
    n_paths: int
    mean_fee: float
    mean_lvr: float
    mean_analytic_lvr: float
    relative_gap: float
    mean_abs_gap: float


def summarize_funding(ledger: PathLedger) -> FundingSummary:
    """Compare terminal funding income and LVR averaged over paths."""
    if ledger.fee is None:
        raise DomainError("the ledger has no funding series attached")
    n = ledger.prices.shape[0]
    fee_T, lvr_T = ledger.fee[:, -1], ledger.lvr[:, -1]
    mean_fee = math.fsum(fee_T) / n
    mean_lvr = math.fsum(lvr_T) / n
    return FundingSummary(
        n_paths=n,
        mean_fee=mean_fee,
        mean_lvr=mean_lvr,
        mean_analytic_lvr=math.fsum(ledger.analytic_lvr[:, -1]) / n,
        relative_gap=abs(mean_fee - mean_lvr) / abs(mean_lvr) if mean_lvr != 0.0 else math.inf,
        mean_abs_gap=math.fsum(np.abs(fee_T - lvr_T)) / n,
    )


@dataclass(frozen=True, eq=False)
class ExitSample:
    """First-exit times (years) of the paths that left the band before the horizon."""

    times: np.ndarray
    n_paths: int
    censored: int
    mean: float
    variance: float
    std: float
    mad: float
    std_error: float

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.n_paths


def _exit_statistics(times: np.ndarray, n_paths: int) -> ExitSample:
    n = times.size
    mean = math.fsum(times) / n
    variance = math.fsum((times - mean) ** 2) / n
    return ExitSample(
        times=times,
        n_paths=n_paths,
        censored=n_paths - n,
        mean=mean,
        variance=variance,
        std=math.sqrt(variance),
        mad=math.fsum(np.abs(times - mean)) / n,
        std_error=math.sqrt(variance / n),
    )


def _first_exit_step(
    rng: np.random.Generator,
    x0: float,
    log_lower: float,
    log_upper: float,
    drift: float,
    vol: float,
    n_steps: int,
    bridge: bool,
) -> int:
    """Index of the first step ending outside the band, -1 if the path survives."""
    y = x0
    done = 0
    while done < n_steps:
        m = min(constants.exit_block, n_steps - done)
        path = y + np.cumsum(drift + vol * rng.standard_normal(m))
        out = (path <= log_lower) | (path >= log_upper)
        if bridge and vol > 0.0:
            start = np.concatenate(([y], path[:-1]))
            u = rng.random(m)
            with np.errstate(over="ignore", invalid="ignore"):
                # probability that the Brownian bridge touched a barrier inside the step
                p_lower = np.exp(-2.0 * (start - log_lower) * (path - log_lower) / vol**2)
                p_upper = np.exp(-2.0 * (log_upper - start) * (log_upper - path) / vol**2)
            out |= u < p_lower + p_upper
        hit = np.flatnonzero(out)
        if hit.size:
            return done + int(hit[0]) + 1
        y = path[-1]
        done += m
    return -1


def sample_first_exit(
    params: MarketParams,
    S0: float,
    S_lower: float,
    S_upper: float,
    cfg: GBMConfig,
    bridge_correction: bool = False,
    threads: Optional[int] = None,
) -> ExitSample:
    """
    Sample the first time each path leaves (S_lower, S_upper).

    The step size, horizon, seed and path count are taken from `cfg`. Exits are detected
    at the end of each step, which delays them by O(sqrt(dt)); `bridge_correction` adds the
    Brownian-bridge crossing probability of every step to remove that bias.

    Paths still inside the band at the horizon are excluded and reported with a
    :py:class:`CensoringWarning`.

    :raises: DomainError if S0 lies outside [S_lower, S_upper], HorizonError if no path exits.
    """
    HorizonInputs(params, S0, S_lower, S_upper)
    x0, log_lower, log_upper = math.log(S0), math.log(S_lower), math.log(S_upper)
    n_steps = cfg.n_steps
    steps = np.zeros(cfg.n_paths, dtype=np.int64)
    if log_lower < x0 < log_upper:
        drift = params.drift * cfg.dt
        vol = params.sigma * math.sqrt(cfg.dt)

        def work(indices):
            for i in indices:
                rng = path_rng(cfg.seed, i)
                steps[i] = _first_exit_step(rng, x0, log_lower, log_upper, drift, vol, n_steps, bridge_correction)

        _for_each_chunk(cfg.n_paths, threads, work)

    exited = steps >= 0
    censored = int(cfg.n_paths - exited.sum())
    if censored == cfg.n_paths:
        raise HorizonError(f"none of the {cfg.n_paths} paths left the band within {cfg.horizon!r} years")
    if censored:
        warnings.warn(
            f"{censored} of {cfg.n_paths} paths did not leave the band within {cfg.horizon!r} years "
            "and are excluded from the statistics",
            CensoringWarning,
        )
    logger.debug("first exit sampled for %i paths, %i censored", cfg.n_paths, censored)
    return _exit_statistics(steps[exited] * cfg.dt, cfg.n_paths)


def exit_config(
    params: MarketParams,
    S0: float,
    S_lower: float,
    S_upper: float,
    n_paths: int,
    seed: int = 0,
    dt: float = constants.exit_dt,
    horizon: Optional[float] = None,
) -> GBMConfig:
    """Simulation settings for exit sampling, the horizon defaults to 50 mean exit times."""
    if horizon is None:
        tau = mean_exit_time(HorizonInputs(params, S0, S_lower, S_upper))
        horizon = max(constants.exit_horizon_factor * tau, dt)
    return GBMConfig(params=params, S0=S0, dt=dt, horizon=horizon, seed=seed, n_paths=n_paths)


def exit_histogram(sample: ExitSample, bins: int = 50) -> Tuple[np.ndarray, np.ndarray]:
    """Bin edges and counts of the exit times."""
    counts, edges = np.histogram(sample.times, bins=bins)
    return edges, counts
