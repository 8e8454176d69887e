"""
Command line interface of cilvr.

Every subcommand computes its results first and only then writes its files, together
with a ``manifest.yaml`` that records the arguments, seed, input hashes and software
versions of the run. Exit codes are 0 on success, 2 for invalid input and 3 for
numerical failures.
"""

import argparse
import json
import logging
import pathlib
import sys
import warnings

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .fileio import (MANIFEST_NAME, InputFile, RunManifest, Table, atomic_write, current_software,
                     dependency_versions, load_term_structure, save_json, save_manifest, save_table)
from .fileio.base import _todict
from .pricing import constants
from .pricing.amm_position import LiquidityBand
from .pricing.band_design import (DESIGN_COLUMNS, generate_design_table, render_design_table,
                                  residual_profile)
from .pricing.base import (BoundsError, ConvergenceError, DomainError, HorizonError, OutOfRangeWarning, TilingError,
                           resolve_threads)
from .pricing.calibration import calibrate_sigma_eff, error_bounds, with_bounds
from .pricing.ci_option import CIPutSpec, MarketParams, solve_ci_put
from .pricing.horizon import HorizonInputs, mean_exit_time
from .pricing.pathwise_sim import (GBMConfig, accumulate_funding, accumulate_lvr, exit_config, exit_histogram,
                                   sample_first_exit, simulate_paths, summarize_funding)
from .pricing.replication import (SweepConfig, build_chained_strip, build_uniform_strip, replication_error_sweep,
                                  replication_errors)

logger = logging.getLogger("cilvr")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

# options that do not change the results and are left out of the manifest
_UNRECORDED = ("handler", "out", "threads", "verbose", "subcommand", "seed", "iv")

Output = Tuple[str, Any]


@dataclass
class RunConfig:
    """
    Settings of one command line run, everything but the subcommand options themselves.
    """

    subcommand: str
    out: pathlib.Path
    seed: Optional[int] = None
    threads: Optional[int] = None
    inputs: List[str] = field(default_factory=list)
    arguments: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        options = vars(args)
        arguments = {key: options[key] for key in sorted(options) if key not in _UNRECORDED}
        return cls(
            subcommand=args.subcommand,
            out=pathlib.Path(args.out),
            seed=options.get("seed"),
            threads=args.threads,
            inputs=[str(args.iv)] if options.get("iv") else [],
            arguments=arguments,
        )

    def manifest(self, outputs: Sequence[str], flags: Sequence[str]) -> RunManifest:
        return RunManifest(
            command=self.subcommand,
            software=current_software(),
            arguments=self.arguments,
            seed=self.seed,
            dependencies=dependency_versions(),
            inputs=[InputFile(name) for name in self.inputs] or None,
            outputs=sorted(outputs) + [MANIFEST_NAME],
            flags=list(flags) or None,
        )


def _params(args) -> MarketParams:
    return MarketParams(r=args.r, sigma=args.sigma)


def _band(args) -> LiquidityBand:
    return LiquidityBand.normalized(args.a, args.b)


def _warn_outside(name: str, values: Sequence[float], lo: float, hi: float):
    outside = [v for v in values if not lo <= v <= hi]
    if outside:
        warnings.warn(
            f"{name}={', '.join(f'{v:g}' for v in outside)} lies outside the reference range [{lo:g}, {hi:g}]",
            OutOfRangeWarning,
        )


def cmd_price(args, cfg: RunConfig) -> Tuple[List[Output], Optional[str]]:
    """Price and delta curves of one or more CI puts, boundaries and coefficients on stdout."""
    params = _params(args)
    solutions = [solve_ci_put(params, CIPutSpec(args.K, q)) for q in args.q]
    S_min = args.S_min if args.S_min is not None else 0.9 * min(s.S_lower for s in solutions)
    S_max = args.S_max if args.S_max is not None else 1.1 * max(s.S_upper for s in solutions)
    if not 0.0 < S_min < S_max:
        raise DomainError(f"price grid [{S_min!r}, {S_max!r}] is empty or not positive")
    if args.points < 2:
        raise DomainError("the price grid needs at least two points")
    S = np.linspace(S_min, S_max, args.points)
    blocks = [np.column_stack([np.full(S.shape, s.fee_rate), S, s.price(S), s.delta(S)]) for s in solutions]
    table = Table(["q", "S", "price", "delta"], np.vstack(blocks))
    summary = [_todict(s) for s in solutions]
    return [("price.csv", table), ("price.json", summary)], json.dumps(summary, indent=2, sort_keys=True)


def cmd_strip(args, cfg: RunConfig) -> Tuple[List[Output], Optional[str]]:
    """Strike table and delta curve of a uniform or chained strip."""
    band, params = _band(args), _params(args)
    if args.scheme == "uniform":
        _warn_outside("dK", [args.dK], min(constants.sweep_dK_values), max(constants.sweep_dK_values))
        strip = build_uniform_strip(band, params, args.q, args.dK)
    else:
        strip = build_chained_strip(band, params, args.q)
    strikes = Table(["K", "w", "S_lower", "S_upper"], np.column_stack([strip.strikes, strip.weights, strip.lower,
                                                                     strip.upper]))
    S = np.linspace(band.a, band.b, args.points)
    curve = Table(
        ["S", "target_delta", "strip_delta", "strip_value"],
        np.column_stack([S, band.delta(S), strip.delta(S), strip.value(S)]),
    )
    max_abs, rmse = replication_errors(band, strip, args.points)
    summary = {
        "scheme": args.scheme,
        "n_strikes": len(strip),
        "weight_sum": strip.weight_sum,
        "max_abs_err": max_abs,
        "rmse": rmse,
        "overshoot": getattr(strip, "overshoot", None),
    }
    return [("strip.csv", strikes), ("strip_delta.csv", curve), ("strip.json", summary)], None


def cmd_sweep(args, cfg: RunConfig) -> Tuple[List[Output], Optional[str]]:
    """Replication errors of uniform strips over the (q, dK) grid."""
    _warn_outside("q", args.q, min(constants.sweep_q_values), max(constants.sweep_q_values))
    _warn_outside("dK", args.dK, min(constants.sweep_dK_values), max(constants.sweep_dK_values))
    if args.N != constants.sweep_grid_size:
        warnings.warn(f"N={args.N} differs from the reference grid size {constants.sweep_grid_size}",
                      OutOfRangeWarning)
    sweep = SweepConfig(band=_band(args), params=_params(args), q_values=tuple(args.q), dK_values=tuple(args.dK),
                        grid_size=args.N)
    cells = replication_error_sweep(sweep, cfg.threads)
    table = Table(
        ["q", "dK", "max_abs_err", "rmse"],
        np.array([[c.q, c.dK, c.max_abs_err, c.rmse] for c in cells]),
    )
    failing = [c for c in cells if not c.below_threshold]
    if failing:
        logger.warning("%i of %i cells have errors of %g or more", len(failing), len(cells),
                       constants.sweep_error_level)
    return [("sweep.csv", table), ("sweep.json", {"cells": cells, "error_level": constants.sweep_error_level})], None


def cmd_simulate(args, cfg: RunConfig) -> Tuple[List[Output], Optional[str]]:
    """Hedge a band along simulated paths and compare the chained strip funding with its LVR."""
    band, params = _band(args), _params(args)
    sim = GBMConfig(params=params, S0=args.S0, dt=args.dt, horizon=args.T, seed=args.seed, n_paths=args.n_paths)
    if not 0 <= args.path < sim.n_paths:
        raise DomainError(f"path {args.path} is not one of the {sim.n_paths} simulated paths")
    strip = build_chained_strip(band, params, args.q)
    paths = simulate_paths(sim, cfg.threads)
    ledger = accumulate_lvr(band, paths).attach_funding(accumulate_funding(strip, paths))
    names, data = ledger.path_table(args.path)
    summary = {
        "funding": summarize_funding(ledger),
        "n_strikes": len(strip),
        "overshoot": strip.overshoot,
        "n_steps": sim.n_steps,
    }
    return [("ledger.csv", Table(list(names), data)), ("summary.json", summary)], None


def cmd_exit(args, cfg: RunConfig) -> Tuple[List[Output], Optional[str]]:
    """First-exit times from the continuation band, closed form against simulation."""
    params = _params(args)
    sol = solve_ci_put(params, CIPutSpec(args.K, args.q))
    S0 = args.K if args.S0 is None else args.S0
    tau = mean_exit_time(HorizonInputs(params, S0, sol.S_lower, sol.S_upper))
    sim = exit_config(params, S0, sol.S_lower, sol.S_upper, args.n_paths, seed=args.seed, dt=args.dt,
                      horizon=args.T)
    sample = sample_first_exit(params, S0, sol.S_lower, sol.S_upper, sim, args.bridge, cfg.threads)
    edges, counts = exit_histogram(sample, args.bins)
    summary = {
        "S_lower": sol.S_lower,
        "S_upper": sol.S_upper,
        "tau_bar": tau,
        "tau_bar_months": 12.0 * tau,
        "mc_mean": sample.mean,
        "mc_std": sample.std,
        "mc_mad": sample.mad,
        "mc_std_error": sample.std_error,
        "z_score": (sample.mean - tau) / sample.std_error if sample.std_error > 0.0 else None,
        "n_paths": sample.n_paths,
        "censored": sample.censored,
        "horizon": sim.horizon,
    }
    return [
        ("exit_times.csv", Table(["tau"], sample.times[:, None])),
        ("exit_histogram.csv", Table(["bin_left", "bin_right", "count"],
                                     np.column_stack([edges[:-1], edges[1:], counts]))),
        ("exit_summary.json", summary),
    ], None


def cmd_calibrate(args, cfg: RunConfig) -> Tuple[List[Output], Optional[str]]:
    """Effective volatility from an implied volatility term structure."""
    ts = load_term_structure(args.iv)
    result = calibrate_sigma_eff(ts, args.r, args.K, args.q, args.S0)
    bundle = {"result": result, "pillars": ts.pillars}
    if args.n_paths > 0:
        params = MarketParams(r=args.r, sigma=result.sigma_eff)
        sol = solve_ci_put(params, CIPutSpec(args.K, args.q))
        S0 = args.K if args.S0 is None else args.S0
        sim = exit_config(params, S0, sol.S_lower, sol.S_upper, args.n_paths, seed=args.seed, dt=args.dt)
        sample = sample_first_exit(params, S0, sol.S_lower, sol.S_upper, sim, args.bridge, cfg.threads)
        bounds = error_bounds(ts, result, sample)
        bundle.update(result=with_bounds(result, bounds), bounds=bounds, bounds_hold=bounds.holds)
    return [("calibration.json", bundle)], None


def cmd_design(args, cfg: RunConfig) -> Tuple[List[Output], Optional[str]]:
    """Fee rates and bands for target holding times, with the residual profile."""
    if args.horizon_days:
        horizons = [(f"{d:g} d", d / constants.days_per_year) for d in args.horizon_days]
    else:
        horizons = constants.design_horizons
    sigmas = args.sigma or constants.design_sigmas
    rows = generate_design_table(r=args.r, horizons=horizons, sigmas=sigmas, K=args.K, threads=cfg.threads)
    profile = residual_profile(r=args.r, sigmas=sigmas, K=args.K, threads=cfg.threads)
    text = render_design_table(rows)
    table = Table(list(DESIGN_COLUMNS), np.array([row.as_tuple() for row in rows]))
    profile_table = Table(
        ["tau_days", "sigma_eff", "q", "rK_pct_q"],
        np.array([[row.tau_bar * constants.days_per_year, row.sigma_eff, row.q, row.rK_pct_q] for row in profile]),
    )
    return [("design_table.csv", table), ("design_table.txt", text), ("residual_profile.csv", profile_table)], text


def _add_market(parser: argparse.ArgumentParser, r: float, sigma: Optional[float]):
    parser.add_argument("--r", type=float, default=r, help=f"risk-free rate, decimal (default: {r})")
    if sigma is not None:
        parser.add_argument("--sigma", type=float, default=sigma, help=f"volatility, decimal (default: {sigma})")


def _add_band(parser: argparse.ArgumentParser):
    a, b = constants.sweep_band
    parser.add_argument("--a", type=float, default=a, help=f"lower band price (default: {a:g})")
    parser.add_argument("--b", type=float, default=b, help=f"upper band price (default: {b:g})")


def _add_simulation(parser: argparse.ArgumentParser, n_paths: int, dt: float = constants.exit_dt):
    parser.add_argument("--n-paths", type=int, default=n_paths, help=f"number of paths (default: {n_paths})")
    parser.add_argument("--dt", type=float, default=dt, help=f"time step in years (default: {dt:g})")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads, overrides the CI_LVR_THREADS environment variable")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="cilvr", description="Perpetual CI puts and the LVR of liquidity bands.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
        sub.set_defaults(handler=handler)
        return sub

    p = add("price", cmd_price, "price and delta of CI puts")
    _add_market(p, constants.sweep_r, constants.sweep_sigma)
    p.add_argument("--K", type=float, default=100.0, help="strike (default: 100)")
    p.add_argument("--q", type=float, action="append", required=True, help="fee rate per year, repeatable")
    p.add_argument("--S-min", type=float, default=None, help="lower end of the price grid")
    p.add_argument("--S-max", type=float, default=None, help="upper end of the price grid")
    p.add_argument("--points", type=int, default=501, help="price grid points (default: 501)")

    p = add("strip", cmd_strip, "strike strip replicating the delta of a band")
    _add_market(p, constants.sweep_r, constants.sweep_sigma)
    _add_band(p)
    p.add_argument("--q", type=float, required=True, help="fee rate per year")
    p.add_argument("--scheme", choices=("uniform", "chained"), default="uniform", help="strike placement")
    p.add_argument("--dK", type=float, default=1.0, help="strike spacing of the uniform scheme (default: 1)")
    p.add_argument("--points", type=int, default=constants.sweep_grid_size, help="evaluation grid points")

    p = add("sweep", cmd_sweep, "replication errors over fee rates and strike spacings")
    _add_market(p, constants.sweep_r, constants.sweep_sigma)
    _add_band(p)
    p.add_argument("--q", type=float, action="append", help="fee rate, repeatable (default: reference grid)")
    p.add_argument("--dK", type=float, action="append", help="strike spacing, repeatable (default: reference grid)")
    p.add_argument("--N", type=int, default=constants.sweep_grid_size, help="error grid points")

    p = add("simulate", cmd_simulate, "pathwise funding income against LVR of a band")
    _add_market(p, constants.sweep_r, constants.sweep_sigma)
    _add_band(p)
    p.add_argument("--q", type=float, default=1e4, help="fee rate of the chained strip (default: 1e4)")
    p.add_argument("--S0", type=float, default=100.0, help="start price (default: 100)")
    p.add_argument("--T", type=float, default=0.05, help="horizon in years (default: 0.05)")
    p.add_argument("--path", type=int, default=0, help="path written to the ledger (default: 0)")
    _add_simulation(p, 1000)

    p = add("exit", cmd_exit, "first-exit times from the continuation band")
    _add_market(p, 0.02, 0.67)
    p.add_argument("--K", type=float, default=100.0, help="strike (default: 100)")
    p.add_argument("--q", type=float, default=5.0, help="fee rate per year (default: 5)")
    p.add_argument("--S0", type=float, default=None, help="start price (default: K)")
    p.add_argument("--T", type=float, default=None, help="simulation horizon in years (default: 50 mean exit times)")
    p.add_argument("--bins", type=int, default=50, help="histogram bins (default: 50)")
    p.add_argument("--bridge", action="store_true", help="correct exits for crossings inside a step")
    _add_simulation(p, 2000)

    p = add("calibrate", cmd_calibrate, "effective volatility from an implied volatility term structure")
    _add_market(p, 0.02, None)
    p.add_argument("--iv", type=pathlib.Path, required=True, help="csv (tenor_days,iv) or json term structure")
    p.add_argument("--K", type=float, default=100.0, help="strike (default: 100)")
    p.add_argument("--q", type=float, required=True, help="fee rate per year")
    p.add_argument("--S0", type=float, default=None, help="start price (default: K)")
    p.add_argument("--bridge", action="store_true", help="correct exits for crossings inside a step")
    _add_simulation(p, 1000, dt=1e-4)

    p = add("design", cmd_design, "fee rate and band for target holding times")
    _add_market(p, constants.design_r, None)
    p.add_argument("--K", type=float, default=constants.design_strike, help="strike (default: 100)")
    p.add_argument("--sigma", type=float, action="append", help="effective volatility, repeatable")
    p.add_argument("--horizon-days", type=float, action="append", help="mean holding time in days, repeatable")
    return parser


def _write_outputs(out: pathlib.Path, outputs: Sequence[Output]):
    out.mkdir(parents=True, exist_ok=True)
    for name, payload in outputs:
        path = out / name
        if isinstance(payload, Table):
            save_table(payload, path)
        elif isinstance(payload, str):
            with atomic_write(path) as f:
                f.write(payload)
        else:
            save_json(payload, path)
        logger.info("wrote %s", path)


def _fill_defaults(args: argparse.Namespace):
    if args.subcommand == "sweep":
        args.q = sorted(args.q or constants.sweep_q_values)
        args.dK = sorted(args.dK or constants.sweep_dK_values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    _fill_defaults(args)
    prefix = f"cilvr {args.subcommand}: error:"
    try:
        cfg = RunConfig.from_args(args)
        cfg.threads = resolve_threads(cfg.threads)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            outputs, stdout_text = args.handler(args, cfg)
        flags = []
        for w in caught:
            message = f"{w.category.__name__}: {w.message}"
            logger.warning(message)
            if message not in flags:
                flags.append(message)
        _write_outputs(cfg.out, outputs)
        save_manifest(cfg.manifest([name for name, _ in outputs], flags), cfg.out / MANIFEST_NAME)
    except (BoundsError, ConvergenceError, HorizonError, TilingError) as e:
        print(f"{prefix} {e.__class__.__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as e:
        print(f"{prefix} {e.__class__.__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID
    if stdout_text:
        sys.stdout.write(stdout_text if stdout_text.endswith("\n") else stdout_text + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
