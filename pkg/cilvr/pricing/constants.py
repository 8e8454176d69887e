"""
Numerical defaults and the reference parameter grids used throughout the package.

Rates and volatilities are annualized decimals, times are in years.
"""

# day count conventions for horizons quoted in days, weeks and months
days_per_year = 365.0
day = 1.0 / days_per_year
week = 7.0 / days_per_year
month = 1.0 / 12.0

# closed form checks
boundary_rtol = 1e-9  # relative to K, value-matching and smooth-fit
fd_nodes = 100_000  # finite-difference oracle grid

# strike inversion for chained strips
strike_xtol = 1e-12  # relative to the target boundary
strike_max_iter = 200
strike_bracket_growth = 2.0

# mean exit time
drift_switch = 1e-8  # |r - sigma^2/2| below drift_switch*sigma^2 uses the series form
horizon_rtol = 1e-6  # target accuracy of q inversion
horizon_max_iter = 200
q_max_factor = 1e9  # upper end of the q bracket in units of K
exit_horizon_factor = 50.0  # default simulation horizon in multiples of the mean exit time

# fixed point calibration
calibration_tol = 1e-10
calibration_damping = 0.5
calibration_max_iter = 200
derivative_grid = 1000  # points per segment for the sup-derivative bound

# replication sweep, reference parameters of the uniform-strike experiment
sweep_r = 0.01
sweep_sigma = 0.25
sweep_band = (80.0, 125.0)
sweep_grid_size = 2000
sweep_q_values = (8.0, 16.0, 32.0, 64.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0)
sweep_dK_values = (0.25, 0.5, 1.0, 2.0, 4.0)
sweep_error_level = 1e-3

# path simulation
exit_dt = 1e-5
exit_block = 2048  # steps drawn per path and block while searching for the exit

# band design table, r = 5% and an at-the-money strike of 100
design_r = 0.05
design_strike = 100.0
design_horizons = (
    ("1 d", day),
    ("1 wk", week),
    ("2 wk", 2 * week),
    ("1 mo", month),
    ("2 mo", 2 * month),
)
design_sigmas = (0.6, 0.8, 1.0)
profile_days = (1, 2, 3, 5, 7, 10, 14, 21, 30, 45, 60)
