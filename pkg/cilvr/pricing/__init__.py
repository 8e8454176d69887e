"""
Closed-form CI put pricing, AMM position greeks, delta replication, path simulation,
exit-time horizons, volatility calibration and band design.

Functions sharing a name between modules (price, delta, value, gamma, lvr_rate) are
available from their modules, e.g. :code:`cilvr.pricing.ci_option.delta`.
"""

from .amm_position import ConstantProductPosition, LiquidityBand, Position
from .band_design import (BandDesign, CIPutPosition, DesignLVRCheck, DesignRow, design_band, generate_design_table,
                          lvr_residual, render_design_table, residual_profile, simulate_design_lvr)
from .base import (AdmissibilityError, BoundsError, CalendarArbitrageWarning, CensoringWarning, ConfigError,
                   ConvergenceError, DomainError, HorizonError, NoSolutionError, OutOfRangeWarning, TilingError,
                   resolve_threads)
from .calibration import (CalibrationResult, ErrorBounds, IVTermStructure, calibrate_sigma_eff, error_bounds,
                          implied_variance, sup_derivative, total_variance, with_bounds)
from .ci_option import (CIPutSolution, CIPutSpec, MarketParams, band_width_limit, ci_boundaries, ode_residual,
                        solve_ci_put, solve_ode_fd)
from .horizon import HorizonInputs, band_exit_time, mean_exit_time, solve_q_for_horizon
from .pathwise_sim import (ExitSample, FundingSeries, FundingSummary, GBMConfig, PathLedger, PathSet,
                           accumulate_funding, accumulate_lvr, exit_config, exit_histogram, sample_first_exit,
                           simulate_paths, summarize_funding)
from .replication import (ChainedStrip, StrikeStrip, SweepCell, SweepConfig, build_chained_strip, build_uniform_strip,
                          default_sweep_config, replication_error_sweep, strip_delta, strip_value)

__all__ = [s for s in dir() if not s.startswith("_")]
