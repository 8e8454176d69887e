"""
Liquidity bands shaped after a single perpetual CI put.

A band whose value is V(S) = K* - P_q(S; K*) has the delta -X_q(S; K*) and, from the
CI put ODE, an instantaneous LVR rate

    1/2 sigma^2 S^2 P''(S) = q + eps(S),    eps(S) = r (P(S) - S P'(S))

with 0 <= eps <= r K*. Holding such a band therefore costs the fee rate q per year up
to the residual r K*. The design table lists q and the band for a desired mean
holding time and effective volatility.
"""

import logging
import math

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import constants
from .amm_position import Position
from .base import DomainError, HorizonError, as_output, as_price_array, check_positive, resolve_threads
from .ci_option import CIPutSolution, CIPutSpec, MarketParams, solve_ci_put
from .horizon import solve_q_for_horizon
from .pathwise_sim import GBMConfig, accumulate_lvr, simulate_paths

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

DESIGN_COLUMNS = (
    "tau_bar",
    "sigma_eff",
    "q",
    "S_lower",
    "S_upper",
    "q_pct_K",
    "S_lower_pct_K",
    "S_upper_pct_K",
    "width_pct_K",
    "rK_pct_q",
    "rK_pct_K",
)


@dataclass(frozen=True)
class CIPutPosition(Position):
    """Liquidity position with the value K - P_q(S; K) of a short CI put plus K in token1."""

    solution: CIPutSolution

    @property
    def support(self) -> Tuple[float, float]:
        return self.solution.S_lower, self.solution.S_upper

    def value(self, S: ArrayLike) -> ArrayLike:
        return as_output(self.solution.strike - np.asarray(self.solution.price(S)), S)

    def delta(self, S: ArrayLike) -> ArrayLike:
        return as_output(-np.asarray(self.solution.delta(S)), S)

    def curvature(self, S: ArrayLike) -> ArrayLike:
        return as_output(-np.asarray(self.solution.gamma(S)), S)


@dataclass(frozen=True)
class BandDesign:
    params: MarketParams
    K_star: float
    q: float
    a: float
    b: float
    residual_bound: float
    width_pct: float
    solution: CIPutSolution = field(repr=False)

    @property
    def position(self) -> CIPutPosition:
        return CIPutPosition(self.solution)


def design_band(params: MarketParams, K_star: float, q: float) -> BandDesign:
    """
    Band matching the delta of the CI put (K_star, q).

    :raises: AdmissibilityError if q <= r*K_star.
    """
    sol = solve_ci_put(params, CIPutSpec(K_star, q))
    return BandDesign(
        params=params,
        K_star=K_star,
        q=q,
        a=sol.S_lower,
        b=sol.S_upper,
        residual_bound=params.r * K_star,
        width_pct=100.0 * sol.width / K_star,
        solution=sol,
    )


def lvr_residual(design: BandDesign, S: ArrayLike) -> ArrayLike:
    """
    eps(S) = r (P(S) - S X_q(S)), the LVR rate in excess of q.

    Takes the value r K* at S = a and 0 at S = b.

    :raises: DomainError outside [a, b].
    """
    arr = as_price_array(S)
    if not np.all((arr >= design.a) & (arr <= design.b)):
        raise DomainError(f"the residual is only defined inside [{design.a}, {design.b}]")
    sol = design.solution
    Sc = np.clip(arr, design.a, design.b)
    inner = design.params.r * (np.asarray(sol.continuation_price(Sc)) - Sc * np.asarray(sol.continuation_delta(Sc)))
    values = np.where(arr <= design.a, design.residual_bound, np.where(arr >= design.b, 0.0, inner))
    return as_output(values, S)


def round_half_away(value: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


@dataclass(frozen=True)
class DesignRow:
    label: str
    tau_bar: float
    sigma_eff: float
    r: float
    K: float
    q: float
    S_lower: float
    S_upper: float

    @property
    def q_pct_K(self) -> float:
        return 100.0 * self.q / self.K

    @property
    def S_lower_pct_K(self) -> float:
        return 100.0 * self.S_lower / self.K

    @property
    def S_upper_pct_K(self) -> float:
        return 100.0 * self.S_upper / self.K

    @property
    def width_pct_K(self) -> float:
        return 100.0 * (self.S_upper - self.S_lower) / self.K

    @property
    def rK_pct_q(self) -> float:
        return 100.0 * self.r * self.K / self.q

    @property
    def rK_pct_K(self) -> float:
        return 100.0 * self.r

    def as_tuple(self) -> Tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in DESIGN_COLUMNS)

    def rounded(self) -> Tuple[int, ...]:
        """Percentages as printed: sigma, q, S_lower, S_upper, width, rK in % of q."""
        return tuple(
            round_half_away(v)
            for v in (
                100.0 * self.sigma_eff,
                self.q_pct_K,
                self.S_lower_pct_K,
                self.S_upper_pct_K,
                self.width_pct_K,
                self.rK_pct_q,
            )
        )


def _horizon_items(horizons) -> List[Tuple[str, float]]:
    items = []
    for item in horizons:
        if isinstance(item, (tuple, list)):
            label, tau = item
        else:
            label, tau = f"{float(item):g} yr", item
        items.append((str(label), check_positive("horizon", tau)))
    return items


def _design_row(r: float, K: float, label: str, tau: float, sigma: float) -> DesignRow:
    params = MarketParams(r=r, sigma=check_positive("sigma_eff", sigma))
    q = solve_q_for_horizon(params, K, tau)
    design = design_band(params, K, q)
    logger.debug("%s at %g: q=%g band [%g, %g]", label, sigma, q, design.a, design.b)
    return DesignRow(label=label, tau_bar=tau, sigma_eff=sigma, r=r, K=K, q=q, S_lower=design.a, S_upper=design.b)


def generate_design_table(
    r: float = constants.design_r,
    horizons: Sequence = constants.design_horizons,
    sigmas: Sequence[float] = constants.design_sigmas,
    K: float = constants.design_strike,
    threads: Optional[int] = None,
) -> List[DesignRow]:
    """
    Fee rate and band for every combination of mean holding time and effective volatility.

    :param horizons: Mean exit times in years, optionally as (label, years) pairs.

    :return: Rows ordered by horizon, then volatility.
    """
    cells = [(label, tau, sigma) for label, tau in _horizon_items(horizons) for sigma in sigmas]
    workers = resolve_threads(threads)
    if workers == 1:
        return [_design_row(r, K, *cell) for cell in cells]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda cell: _design_row(r, K, *cell), cells))


def render_design_table(rows: Sequence[DesignRow]) -> str:
    """Aligned text layout of the design table with the percentages rounded."""
    widths = (6, 10, 15, 8, 8, 7, 7)
    header_groups = " " * (widths[0] + widths[1] + 2) + "% of K".center(sum(widths[2:6]) + 3) + "  % of q"
    header = ("tau", "sigma_eff", "q (token1/yr)", "S_l(q)", "S_u(q)", "Width", "rK")
    lines = [header_groups, " ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    rule = "-" * len(lines[1])
    lines.append(rule)
    previous = None
    for row in rows:
        if previous is not None and row.label != previous:
            lines.append(rule)
        previous = row.label
        cells = [row.label] + [f"{v}%" for v in row.rounded()]
        lines.append(" ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
    return "\n".join(lines) + "\n"


def residual_profile(
    r: float = constants.design_r,
    horizons_days: Sequence[float] = constants.profile_days,
    sigmas: Sequence[float] = constants.design_sigmas,
    K: float = constants.design_strike,
    threads: Optional[int] = None,
) -> List[DesignRow]:
    """Rows over a finer horizon grid for plotting r*K in % of q against the holding time."""
    horizons = [(f"{d:g} d", d / constants.days_per_year) for d in horizons_days]
    return generate_design_table(r=r, horizons=horizons, sigmas=sigmas, K=K, threads=threads)


@dataclass(frozen=True)
class DesignLVRCheck:
    fee_rate: float
    upper_bound: float
    analytic_rate: float
    simulated_rate: float
    occupancy: float


def simulate_design_lvr(design: BandDesign, cfg: GBMConfig, threads: Optional[int] = None) -> DesignLVRCheck:
    """
    Mean LVR rate of the designed band over the time spent inside the band.

    The analytic rate lies in [q, q + r K*], the pathwise rate measured from the hedge
    ledger scatters around it.

    :raises: DomainError if the simulation uses other market parameters than the design,
        HorizonError if no path spends a step inside the band.
    """
    if cfg.params != design.params:
        raise DomainError("simulate with the market parameters the band was designed for")
    ledger = accumulate_lvr(design.position, simulate_paths(cfg, threads))
    S_left = ledger.prices[:, :-1]
    inside = (S_left > design.a) & (S_left < design.b)
    steps = int(inside.sum())
    if steps == 0:
        raise HorizonError("no simulated step lies inside the band")
    increments = np.diff(ledger.lvr, axis=1)[inside]
    rates = np.asarray(design.position.lvr_rate(design.params, S_left[inside]))
    return DesignLVRCheck(
        fee_rate=design.q,
        upper_bound=design.q + design.residual_bound,
        analytic_rate=math.fsum(rates) / steps,
        simulated_rate=math.fsum(increments) / (steps * cfg.dt),
        occupancy=steps / inside.size,
    )
