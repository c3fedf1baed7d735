"""Command-line entry point: ``mmnoise <subcommand> ...``.

Each subcommand wraps one library operation. Rates given as ``--annual-rate``
are converted to per-trading-day rates; ``--rate`` is already per day (the
same unit as ``--tau`` / ``--days``).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 convergence failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys

import numpy as np

from . import analytic, calibration, marketdata, noise_sim, surfaces, tree, volmodels
from .errors import ConvergenceError, DataError, InsufficientDataError
from .pipeline import ConfigError, PipelineConfig, StageError, exit_code_for, run_pipeline

log = logging.getLogger("mmnoise")


def _emit(text, out=None):
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True)


def _load_chain(args):
    qd = dt.date.fromisoformat(args.quote_date) if getattr(args, "quote_date", None) else None
    return marketdata.load_chain(args.chain, args.spot, args.annual_rate, qd)


def _moments(args):
    series = marketdata.load_returns(args.returns, args.kind, args.window)
    return series, volmodels.historical_moments(series)


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args):
    chain = _load_chain(args)
    clean = marketdata.clean_chain(chain)
    info = {"quotes_raw": len(chain), "quotes_clean": len(clean), "daily_rate": clean.daily_rate}
    if args.boundary is not None:
        short, long = marketdata.split_by_horizon(clean, args.boundary)
        info.update(quotes_short=len(short), quotes_long=len(long))
    if args.out:
        marketdata.write_chain(clean, args.out)
    print(_json(info))


def cmd_price(args):
    price = analytic.bsm_noise_call(args.spot, args.strike, args.tau, args.rate,
                                    args.sigma, args.epsilon)
    print(repr(float(price)))


def cmd_tree_price(args):
    params = tree.tree_params(args.mu, args.sigma, args.p_up, args.rate, args.days, args.steps)
    print(repr(tree.price_european(args.spot, args.strike, params, method=args.method)))


def cmd_simulate(args):
    cfg = noise_sim.PathConfig(args.spot, args.mu, args.sigma, args.epsilon, args.days,
                               args.steps, seed=args.seed, mode=args.mode, rate=args.rate,
                               noise=args.noise)
    term, flags = noise_sim.simulate_terminal(cfg, args.paths, antithetic=False,
                                              workers=args.workers)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        if args.summary:
            w.writerow(["stat", "value"])
            rows = [("n_paths", term.size), ("mean", float(np.mean(term))),
                    ("std", float(np.std(term, ddof=1))), ("min", float(term.min())),
                    ("max", float(term.max())), ("n_floored", int(flags.sum()))]
            if args.strike is not None:
                est = noise_sim.mc_call_price(cfg, args.strike, rate=args.rate,
                                              n_paths=max(args.paths - args.paths % 2, 1000),
                                              workers=args.workers)
                rows += [("call_price", est.price), ("call_standard_error", est.standard_error)]
            for k, v in rows:
                w.writerow([k, repr(v) if isinstance(v, float) else v])
        else:
            w.writerow(["path", "terminal", "floored"])
            for i, (s, f) in enumerate(zip(term, flags)):
                w.writerow([i, repr(float(s)), int(f)])
    finally:
        if args.out:
            fh.close()


def cmd_fit_garch(args):
    series = marketdata.load_returns(args.returns, args.kind, args.window)
    fit = volmodels.fit_arma_garch(series, max_iter=args.max_iter)
    _emit(fit.to_json(indent=2), args.out)


def cmd_implied_eps(args):
    chain = marketdata.clean_chain(_load_chain(args))
    if args.sigma is not None:
        sigma = args.sigma
    elif args.returns:
        series, mom = _moments(args)
        sigma = (volmodels.fit_arma_garch(series).sigma_forecast
                 if args.vol_mode == "arma-garch" else mom.sigma_o)
    else:
        raise ConfigError("give --sigma or --returns")
    pts = calibration.implied_epsilon_surface(chain, sigma, workers=args.workers)
    calibration.write_surface_csv(pts, args.out, "eps")
    print(_json({"sigma": sigma, "n_points": len(pts),
                 "n_converged": sum(p.converged for p in pts)}))


def cmd_implied_musigma(args):
    chain = marketdata.clean_chain(_load_chain(args))
    _, mom = _moments(args)
    pts = calibration.implied_mu_sigma_surface(chain, mom.p_up, (mom.mu_o, mom.sigma_o),
                                               n_steps=args.n_steps, workers=args.workers)
    calibration.write_surface_csv(pts, args.out_mu, "mu")
    calibration.write_surface_csv(pts, args.out_sigma, "sigma")
    conv = [p for p in pts if p.converged]
    print(_json({"n_points": len(pts), "n_converged": len(conv),
                 "n_mu_flat": sum(bool(p.mu_flat) for p in conv),
                 "mu": calibration.surface_summary([p.value_mu for p in conv], mom.mu_o),
                 "sigma": calibration.surface_summary([p.value_sigma for p in conv], mom.sigma_o)}))


def cmd_calibrate_noise(args):
    _, mom = _moments(args)
    pts = calibration.merge_mu_sigma(calibration.read_surface_csv(args.mu_surface, "mu"),
                                     calibration.read_surface_csv(args.sigma_surface, "sigma"))
    noise = calibration.calibrate_noise_params(pts, mom)
    _emit(calibration.params_json(calibration.assemble_params(mom, noise)), args.out)


def cmd_surface(args):
    field = args.field
    pts = [p for p in calibration.read_surface_csv(args.input, field) if p.converged]
    attr = {"eps": "value_eps", "mu": "value_mu", "sigma": "value_sigma"}[field]
    pts = [p for p in pts if getattr(p, attr) is not None]
    if not pts:
        raise InsufficientDataError(f"no converged points in {args.input}")
    t = np.array([p.expiry_days for p in pts], dtype=float)
    m = np.array([p.moneyness for p in pts], dtype=float)
    v = np.array([getattr(p, attr) for p in pts], dtype=float)
    if args.winsor is not None:
        v = surfaces.winsorize(v, args.winsor)
    bw = surfaces.default_bandwidth(t, m)
    bw = (args.bandwidth_t or bw[0], args.bandwidth_m or bw[1])
    t_axis, m_axis = surfaces.regular_axes(t, m, args.grid_t, args.grid_m)
    grid = surfaces.smooth_surface(np.column_stack((t, m, v)), t_axis, m_axis, bw)
    sidecar = surfaces.export_grid(grid, args.out)
    print(_json({"grid": args.out, "sidecar": str(sidecar),
                 "missing_cells": int(grid.missing.sum())}))


_OVERRIDES = ("chain_path", "returns_path", "spot", "annual_rate", "quote_date",
              "horizon_boundary_days", "vol_mode", "n_steps", "bandwidth_t", "bandwidth_m",
              "output_dir", "seed", "workers", "window", "returns_kind")


def cmd_pipeline(args):
    overrides = {k: getattr(args, k) for k in _OVERRIDES}
    if args.config:
        cfg = PipelineConfig.from_json(args.config, overrides)
    else:
        cfg = PipelineConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    report = run_pipeline(cfg)
    print(_json({"output_dir": cfg.output_dir, "calibrated_parameters": report["calibrated_parameters"]}))


# --------------------------------------------------------------------------
# parser


def _chain_args(p):
    p.add_argument("--chain", required=True, help="option chain CSV")
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--annual-rate", type=float, required=True)
    p.add_argument("--quote-date", help="ISO date of the quotes")


def _returns_args(p, required=True):
    p.add_argument("--returns", required=required, help="date,return or date,price CSV")
    p.add_argument("--kind", choices=("returns", "prices"), help="override header detection")
    p.add_argument("--window", type=int, help="use only the last N returns")


def _workers(p):
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: logical cores)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmnoise", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load, validate and clean an option chain")
    _chain_args(p)
    p.add_argument("--boundary", type=int, help="short/long split in days")
    p.add_argument("--out", help="write the cleaned chain here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("price", help="closed-form call price with noise volatility")
    for name in ("spot", "strike", "tau", "rate", "sigma"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("tree-price", help="call price on the drift-preserving tree")
    for name in ("spot", "strike", "days", "rate", "mu", "sigma", "p-up"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--method", choices=("backward", "terminal"), default="backward")
    p.set_defaults(func=cmd_tree_price)

    p = sub.add_parser("simulate", help="Monte Carlo paths; CSV to stdout or --out")
    for name in ("spot", "mu", "sigma", "epsilon", "days"):
        p.add_argument(f"--{name}", type=float, required=True)
    p.add_argument("--steps", type=int, default=252)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--mode", choices=noise_sim.MODES, default="real-world")
    p.add_argument("--noise", choices=noise_sim.NOISE_READINGS, default="absorbed")
    p.add_argument("--summary", action="store_true", help="summary statistics instead of paths")
    p.add_argument("--strike", type=float, help="with --summary, also price a call")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-garch", help="ARMA(3,3)-GARCH(1,1) maximum likelihood fit")
    _returns_args(p)
    p.add_argument("--max-iter", type=int, default=volmodels.MAX_ITER)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit_garch)

    p = sub.add_parser("implied-eps", help="implied noise volatility per quote")
    _chain_args(p)
    _returns_args(p, required=False)
    p.add_argument("--sigma", type=float, help="reference volatility per sqrt(day)")
    p.add_argument("--vol-mode", choices=("historical", "arma-garch"), default="historical")
    p.add_argument("--out", required=True)
    _workers(p)
    p.set_defaults(func=cmd_implied_eps)

    p = sub.add_parser("implied-musigma", help="implied drift and volatility per quote")
    _chain_args(p)
    _returns_args(p)
    p.add_argument("--n-steps", type=int)
    p.add_argument("--out-mu", required=True)
    p.add_argument("--out-sigma", required=True)
    _workers(p)
    p.set_defaults(func=cmd_implied_musigma)

    p = sub.add_parser("calibrate-noise", help="w_er and sigma_n from implied surfaces")
    _returns_args(p)
    p.add_argument("--mu-surface", required=True)
    p.add_argument("--sigma-surface", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_calibrate_noise)

    p = sub.add_parser("surface", help="winsorize and smooth a surface CSV onto a grid")
    p.add_argument("--input", required=True)
    p.add_argument("--field", choices=("eps", "mu", "sigma"), default="eps")
    p.add_argument("--winsor", type=float, help="upper quantile to clip at, e.g. 0.99")
    p.add_argument("--bandwidth-t", type=float)
    p.add_argument("--bandwidth-m", type=float)
    p.add_argument("--grid-t", type=int, default=40)
    p.add_argument("--grid-m", type=int, default=40)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("pipeline", help="full calibration run from a JSON config")
    p.add_argument("--config", help="JSON config; flags below override its keys")
    p.add_argument("--chain", dest="chain_path")
    p.add_argument("--returns", dest="returns_path")
    p.add_argument("--spot", type=float)
    p.add_argument("--annual-rate", type=float)
    p.add_argument("--quote-date")
    p.add_argument("--boundary", dest="horizon_boundary_days", type=int)
    p.add_argument("--vol-mode", choices=("historical", "arma-garch"))
    p.add_argument("--n-steps", type=int)
    p.add_argument("--bandwidth-t", type=float)
    p.add_argument("--bandwidth-m", type=float)
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--returns-kind", choices=("returns", "prices"))
    _workers(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (StageError, ConfigError, DataError, ConvergenceError,
            OSError, ValueError) as exc:
        code = exit_code_for(exc)
        print(f"mmnoise {args.command}: {exc}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
