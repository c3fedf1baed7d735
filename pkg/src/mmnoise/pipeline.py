"""End-to-end calibration run: chain + return history -> noise parameters and surfaces."""
from __future__ import annotations

import dataclasses
import datetime as dt
import json
import logging
import math
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import calibration, marketdata, surfaces, volmodels
from .errors import ConvergenceError, DataError, InsufficientDataError, MMNoiseError

log = logging.getLogger(__name__)

VOL_MODES = ("historical", "arma-garch")
PARTIAL_MARKER = ".partial"
REPORT_NAME = "report.json"


class ConfigError(MMNoiseError):
    pass


class StageError(MMNoiseError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class PipelineConfig:
    chain_path: str
    returns_path: str
    spot: float
    annual_rate: float
    horizon_boundary_days: int
    output_dir: str
    quote_date: str | None = None
    symbol: str = ""
    vol_mode: str = "historical"
    n_steps: int | None = None
    bandwidth_t: float | None = None
    bandwidth_m: float | None = None
    grid_t: int = 40
    grid_m: int = 40
    winsor_quantile: float = 0.99
    returns_kind: str | None = None
    window: int | None = None
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.vol_mode not in VOL_MODES:
            raise ConfigError(f"vol_mode must be one of {VOL_MODES}, got {self.vol_mode!r}")
        if not self.spot or self.spot <= 0:
            raise ConfigError("spot must be positive")
        if self.annual_rate is None or self.annual_rate < 0:
            raise ConfigError("annual_rate must be nonnegative")
        if not self.horizon_boundary_days or int(self.horizon_boundary_days) < 1:
            raise ConfigError("horizon_boundary_days must be >= 1")
        if self.n_steps is not None and int(self.n_steps) < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.quote_date is not None:
            try:
                dt.date.fromisoformat(str(self.quote_date))
            except ValueError:
                raise ConfigError(f"quote_date must be ISO-8601, got {self.quote_date!r}") from None

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path, overrides: dict | None = None) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class _Run:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.timings = {}
        self.artifacts = []

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        log.info("stage %s", name)
        try:
            yield
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def path(self, name):
        self.artifacts.append(name)
        return self.out_dir / name


def _smooth_and_export(run, points, attr, name, cfg, winsor):
    pts = [p for p in points if p.converged and getattr(p, attr) is not None]
    if not pts:
        return None
    t = np.array([p.expiry_days for p in pts], dtype=float)
    m = np.array([p.moneyness for p in pts], dtype=float)
    v = np.array([getattr(p, attr) for p in pts], dtype=float)
    if winsor:
        v = surfaces.winsorize(v, cfg.winsor_quantile)
    bw = surfaces.default_bandwidth(t, m)
    bw = (cfg.bandwidth_t or bw[0], cfg.bandwidth_m or bw[1])
    t_axis, m_axis = surfaces.regular_axes(t, m, cfg.grid_t, cfg.grid_m)
    grid = surfaces.smooth_surface(np.column_stack((t, m, v)), t_axis, m_axis, bw)
    surfaces.export_grid(grid, run.path(f"{name}.grid.csv"))
    run.artifacts.append(f"{name}.grid.json")
    return name


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage and write artifacts plus ``report.json`` under ``output_dir``.

    A ``.partial`` marker sits in the output directory until the run finishes;
    on failure it is left in place and a :class:`StageError` naming the stage
    is raised.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / PARTIAL_MARKER
    marker.write_text("incomplete run\n")
    run = _Run(out)
    workers = config.workers if config.workers is not None else (os.cpu_count() or 1)
    report = {"config": config.to_dict()}

    with run.stage("ingest"):
        quote_date = dt.date.fromisoformat(config.quote_date) if config.quote_date else None
        raw = marketdata.load_chain(config.chain_path, config.spot, config.annual_rate,
                                    quote_date, config.symbol)
        series = marketdata.load_returns(config.returns_path, config.returns_kind, config.window)
    with run.stage("clean"):
        chain = marketdata.clean_chain(raw)
        short, long = marketdata.split_by_horizon(chain, int(config.horizon_boundary_days))
    report["data"] = {"quotes_raw": len(raw), "quotes_clean": len(chain),
                      "quotes_short": len(short), "quotes_long": len(long),
                      "returns_window": series.window,
                      "daily_rate": chain.daily_rate}

    with run.stage("historical_moments"):
        moments = volmodels.historical_moments(series, dt=1.0)
    report["historical"] = {"mu_o": moments.mu_o, "sigma_o": moments.sigma_o,
                            "p_n": moments.p_up, "window": moments.window}
    if not 0 < moments.p_up < 1:
        raise StageError("historical_moments",
                         DataError(f"fraction of positive returns is {moments.p_up}; need 0 < p < 1"))

    vols = {"hist": moments.sigma_o}
    report["arma_garch"] = None
    if config.vol_mode == "arma-garch":
        with run.stage("arma_garch"):
            fit = volmodels.fit_arma_garch(series)
            run.path("arma_garch.json").write_text(fit.to_json(indent=2))
        report["arma_garch"] = fit.to_dict()
        vols["ag"] = fit.sigma_forecast

    subsets = {}
    for label, sub in (("short", short), ("long", long)):
        entry = {"n_quotes": len(sub)}
        subsets[label] = entry
        if len(sub) == 0:
            entry["skipped"] = "no quotes"
            continue

        entry["implied_eps"] = {}
        for vname, sigma in vols.items():
            with run.stage(f"implied_eps_{label}_{vname}"):
                pts = calibration.implied_epsilon_surface(sub, sigma, workers=workers)
                calibration.write_surface_csv(pts, run.path(f"eps_{label}_{vname}.csv"), "eps")
                _smooth_and_export(run, pts, "value_eps", f"eps_{label}_{vname}", config, True)
            conv = [p.value_eps for p in pts if p.converged]
            entry["implied_eps"][vname] = {
                "sigma": sigma, "n_converged": len(conv),
                "quantiles": calibration.surface_summary(conv)}

        with run.stage(f"implied_mu_sigma_{label}"):
            pts = calibration.implied_mu_sigma_surface(
                sub, moments.p_up, (moments.mu_o, moments.sigma_o),
                n_steps=config.n_steps, workers=workers)
            calibration.write_surface_csv(pts, run.path(f"mu_{label}.csv"), "mu")
            calibration.write_surface_csv(pts, run.path(f"sigma_{label}.csv"), "sigma")
            _smooth_and_export(run, pts, "value_mu", f"mu_{label}", config, False)
            _smooth_and_export(run, pts, "value_sigma", f"sigma_{label}", config, False)
        conv = [p for p in pts if p.converged]
        entry["implied_mu_sigma"] = {
            "n_converged": len(conv),
            "n_mu_flat": sum(1 for p in conv if p.mu_flat),
            "mu": calibration.surface_summary([p.value_mu for p in conv], moments.mu_o),
            "sigma": calibration.surface_summary([p.value_sigma for p in conv], moments.sigma_o),
        }

        with run.stage(f"noise_params_{label}"):
            try:
                noise = calibration.calibrate_noise_params(pts, moments)
            except InsufficientDataError as exc:
                entry["noise"] = None
                entry["efficient"] = None
                entry["noise_error"] = str(exc)
                continue
            eff = calibration.assemble_params(moments, noise)
        entry["noise"] = {"w_er": noise.w_er, "sigma_n": noise.sigma_n, "n_points": noise.n_points}
        entry["efficient"] = eff.to_dict()
    report["subsets"] = subsets

    report["calibrated_parameters"] = {
        "historical": {"mu_o": moments.mu_o, "sigma_o": moments.sigma_o, "p_n": moments.p_up},
        **{label: ({"mu_n": s["efficient"]["mu_n"], "sigma_n": s["efficient"]["sigma_n"],
                    "w_er": s["efficient"]["w_er"]} if s.get("efficient") else None)
           for label, s in subsets.items()},
    }
    report["artifacts"] = sorted(run.artifacts)
    report["timings"] = run.timings
    (out / REPORT_NAME).write_text(json.dumps(report, indent=2, sort_keys=True, default=_json_default))
    marker.unlink()
    return report


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def exit_code_for(exc: BaseException) -> int:
    """Process exit code: 2 config, 3 data, 4 convergence."""
    cause = exc.cause if isinstance(exc, StageError) else exc
    if isinstance(cause, ConfigError):
        return 2
    if isinstance(cause, ConvergenceError):
        return 4
    if isinstance(cause, (DataError, OSError, ValueError)):
        return 3
    return 3
