"""Implied-parameter extraction from option quotes.

* ``implied_epsilon``: noise volatility that reprices a quote under the
  closed form with a fixed spot volatility.
* ``implied_mu_sigma``: drift and volatility that reprice a quote on the
  drift-preserving lattice.
* ``calibrate_noise_params`` / ``assemble_params``: aggregate the per-quote
  values into the drift ratio ``w_er`` and the noise volatility ``sigma_n``.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from functools import partial
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from .analytic import bsm_call, no_arbitrage_bounds
from .errors import DegenerateDriftError, DomainError, InsufficientDataError
from .marketdata import OptionChain, OptionQuote
from .tree import check_no_arbitrage, price_european, tree_params
from .volmodels import HistoricalMoments

EPS_TOL = 1e-10          # |C_th - C_emp| / C_emp at an accepted root
MU_SIGMA_TOL = 1e-8      # squared relative error at an accepted (mu, sigma)
VOL_BRACKET = (1e-8, 5.0)
VOL_CAP = 1e3
FLAT_PROBE = 1e-4


@dataclass(frozen=True)
class ImpliedPoint:
    expiry_days: int
    strike: float
    moneyness: float
    value_eps: float | None = None
    value_mu: float | None = None
    value_sigma: float | None = None
    converged: bool = False
    objective: float = math.nan
    mu_flat: bool | None = None


@dataclass(frozen=True)
class NoiseParams:
    w_er: float
    sigma_n: float
    n_points: int = 0

    def __post_init__(self):
        if self.w_er == 0:
            raise DomainError("w_er must be nonzero")


@dataclass(frozen=True)
class EfficientParams:
    mu: float
    sigma: float
    mu_n: float
    mu_o: float
    sigma_o: float
    w_er: float
    sigma_n: float
    p_n: float = math.nan

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


# --------------------------------------------------------------------------
# implied epsilon


def _rel_err(model, target):
    return (model - target) / target


def implied_epsilon(quote: OptionQuote, spot: float, rate: float, sigma: float) -> ImpliedPoint:
    """Solve ``C_bsm(sigma + eps) = last_price`` for ``eps``.

    ``rate`` and ``sigma`` are per trading day; the quote's ``expiry_days`` is
    the time to expiry. The closed form is strictly increasing in total
    volatility, so the squared-relative-error minimum is the root whenever the
    price lies strictly inside the no-arbitrage bounds. Otherwise the nearer
    bracket end is returned with ``converged=False``.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    tau, strike, target = float(quote.expiry_days), quote.strike, quote.last_price

    def point(vol, ok):
        obj = _rel_err(float(bsm_call(spot, strike, tau, rate, vol)), target) ** 2
        return ImpliedPoint(quote.expiry_days, strike, quote.moneyness,
                            value_eps=vol - sigma, converged=ok, objective=obj)

    lo, hi = VOL_BRACKET
    lower, upper = no_arbitrage_bounds(spot, strike, tau, rate)
    if not target > lower:
        return point(lo, False)
    if not target < upper:
        return point(VOL_CAP, False)

    def f(v):
        return float(bsm_call(spot, strike, tau, rate, v)) - target

    if f(lo) > 0:
        return point(lo, False)
    while f(hi) < 0:
        if hi >= VOL_CAP:
            return point(VOL_CAP, False)
        hi = min(2.0 * hi, VOL_CAP)
    vol = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    res = point(vol, False)
    ok = math.sqrt(res.objective) <= EPS_TOL
    return ImpliedPoint(**{**asdict(res), "converged": ok})


# --------------------------------------------------------------------------
# implied (mu, sigma)


def _tree_price(spot, strike, rate, mu, sigma, p_up, tau, n_steps):
    params = tree_params(mu, sigma, p_up, rate, tau, n_steps)
    return price_european(spot, strike, params, method="terminal")


def _sigma_window(mu, rate, p_up, dt):
    """Open interval of sigma for which d < r dt < u and d > -1 at fixed mu."""
    sdt = math.sqrt(dt)
    up_c = math.sqrt((1 - p_up) / p_up) * sdt
    dn_c = math.sqrt(p_up / (1 - p_up)) * sdt
    lo = max((rate - mu) * dt / up_c, (mu - rate) * dt / dn_c, 0.0)
    hi = (1.0 + mu * dt) / dn_c
    return lo, hi


def tree_implied_sigma(quote: OptionQuote, spot, rate, mu, p_up, n_steps=None):
    """One-dimensional lattice implied volatility at fixed drift.

    Returns ``(sigma, squared_rel_error)`` or ``(None, inf)`` when no sigma in
    the admissible window reprices the quote.
    """
    tau = float(quote.expiry_days)
    n = n_steps or quote.expiry_days
    lo, hi = _sigma_window(mu, rate, p_up, tau / n)
    width = hi - lo
    if not width > 0:
        return None, math.inf
    lo, hi = lo + 1e-12 * width + 1e-14, hi - 1e-9 * width

    def f(s):
        return _tree_price(spot, quote.strike, rate, mu, s, p_up, tau, n) - quote.last_price

    try:
        flo, fhi = f(lo), f(hi)
    except DomainError:
        return None, math.inf
    if flo > 0 or fhi < 0:
        return None, math.inf
    s = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    return s, _rel_err(f(s) + quote.last_price, quote.last_price) ** 2


def _nearest_on_curve(quote, spot, rate, p_up, n, init, found, scales, tol):
    mu0, sigma0 = init
    s_mu, s_sigma = scales
    cache = {}

    def sigma_at(mu):
        if mu not in cache:
            cache[mu] = tree_implied_sigma(quote, spot, rate, mu, p_up, n)
        return cache[mu]

    def dist(mu):
        s, obj = sigma_at(mu)
        if s is None or obj > tol:
            return math.inf
        return ((mu - mu0) / s_mu) ** 2 + ((s - sigma0) / s_sigma) ** 2

    mu_f = found[0]
    lo, hi = min(mu0, mu_f), max(mu0, mu_f)
    pad = 0.5 * (hi - lo) + 1e-3 * s_mu
    res = optimize.minimize_scalar(dist, bounds=(lo - pad, hi + pad), method="bounded",
                                   options={"xatol": 1e-10 * s_mu})
    best_mu = float(res.x)
    if dist(best_mu) < dist(mu_f):
        s, obj = sigma_at(best_mu)
        return best_mu, s, obj
    return found


def implied_mu_sigma(quote: OptionQuote, spot: float, rate: float, p_up: float,
                     init: tuple[float, float], n_steps: int | None = None,
                     tol: float = MU_SIGMA_TOL, flat_probe: float = FLAT_PROBE) -> ImpliedPoint:
    """Minimize the squared relative lattice pricing error over (mu, sigma).

    Nelder-Mead starts from ``init`` (normally the historical moments) with a
    fixed simplex; the no-arbitrage window and ``sigma > 0`` are enforced by a
    quadratic exterior penalty. The drift found is then held fixed and sigma
    is polished by a bracketed 1-D solve. Because the zero-residual set is a
    curve, the point of that curve nearest ``init`` (in units of
    ``max(|mu0|, 2e-4)`` and ``sigma0``) is reported.

    One price cannot pin two parameters. ``mu_flat`` reports whether quotes at
    ``mu +/- flat_probe`` are also repriced to within ``tol`` after re-solving
    sigma, in which case the returned drift is only the point reached from
    ``init``.
    """
    if not 0 < p_up < 1:
        raise DomainError(f"p_up must lie in (0, 1), got {p_up}")
    n = quote.expiry_days if n_steps is None else int(n_steps)
    if n < 1:
        raise DomainError(f"n_steps must be >= 1, got {n}")
    tau = float(quote.expiry_days)
    dt = tau / n
    target = quote.last_price
    mu0, sigma0 = float(init[0]), float(init[1])

    def objective(x):
        mu, sigma = x
        r_dt = rate * dt
        sdt = math.sqrt(dt)
        s = max(sigma, 0.0)
        u = mu * dt + math.sqrt((1 - p_up) / p_up) * s * sdt
        d = mu * dt - math.sqrt(p_up / (1 - p_up)) * s * sdt
        viol = max(-sigma, 0.0) ** 2 + max(r_dt - u, 0.0) ** 2 + max(d - r_dt, 0.0) ** 2 \
            + max(-1.0 - d, 0.0) ** 2
        if viol > 0 or sigma <= 0 or not d < r_dt < u or d <= -1:
            return 1.0 + 1e8 * viol
        return _rel_err(_tree_price(spot, quote.strike, rate, mu, sigma, p_up, tau, n), target) ** 2

    h_mu = max(0.05 * abs(mu0), 1e-5)
    h_sigma = 0.05 * abs(sigma0) if sigma0 != 0 else 1e-3
    simplex = np.array([[mu0, sigma0], [mu0 + h_mu, sigma0], [mu0, sigma0 + h_sigma]])
    res = optimize.minimize(objective, np.array([mu0, sigma0]), method="Nelder-Mead",
                            options={"initial_simplex": simplex, "xatol": 1e-12,
                                     "fatol": 1e-26, "maxiter": 4000, "maxfev": 8000})
    mu_hat, sigma_hat = map(float, res.x)
    obj = float(res.fun)

    sigma_pol, obj_pol = tree_implied_sigma(quote, spot, rate, mu_hat, p_up, n)
    if sigma_pol is not None and obj_pol <= max(obj, tol):
        sigma_hat, obj = sigma_pol, obj_pol
        # the simplex stops anywhere along the zero-residual curve; take the
        # point of that curve nearest to init instead
        mu_hat, sigma_hat, obj = _nearest_on_curve(
            quote, spot, rate, p_up, n, (mu0, sigma0), (mu_hat, sigma_hat, obj),
            (h_mu / 0.05, abs(sigma0) or 1.0), tol)

    converged = obj <= tol
    mu_flat = None
    if converged and flat_probe:
        probes = [tree_implied_sigma(quote, spot, rate, mu_hat + s * flat_probe, p_up, n)[1]
                  for s in (-1.0, 1.0)]
        mu_flat = all(o <= tol for o in probes)
    return ImpliedPoint(quote.expiry_days, quote.strike, quote.moneyness,
                        value_mu=mu_hat, value_sigma=sigma_hat,
                        converged=converged, objective=obj, mu_flat=mu_flat)


# --------------------------------------------------------------------------
# surfaces over a chain


def _map(fn, items, workers):
    items = list(items)
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def implied_epsilon_surface(chain: OptionChain, sigma: float, workers: int | None = 1):
    fn = partial(implied_epsilon, spot=chain.spot, rate=chain.daily_rate, sigma=sigma)
    return _map(fn, chain.quotes, workers)


def implied_mu_sigma_surface(chain: OptionChain, p_up: float, init: tuple[float, float],
                             n_steps: int | None = None, workers: int | None = 1):
    fn = partial(implied_mu_sigma, spot=chain.spot, rate=chain.daily_rate, p_up=p_up,
                 init=init, n_steps=n_steps)
    return _map(fn, chain.quotes, workers)


# --------------------------------------------------------------------------
# aggregate noise parameters


def lower_median(values) -> float:
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise InsufficientDataError("median of an empty set")
    return float(x[(x.size - 1) // 2])


def calibrate_noise_params(surface: Sequence[ImpliedPoint], moments: HistoricalMoments) -> NoiseParams:
    """Least-absolute-deviation fit of ``w_er`` and ``sigma_n``.

    Both problems are scalar L1 location fits, solved exactly by medians:
    ``w_er = median(mu_imp) / mu_o`` and ``sigma_n = median(sigma_imp) - sigma_o``.
    Only converged points enter.
    """
    pts = [p for p in surface
           if p.converged and p.value_mu is not None and p.value_sigma is not None]
    if not pts:
        raise InsufficientDataError("no converged implied (mu, sigma) points")
    if moments.mu_o == 0:
        raise DegenerateDriftError("historical drift is zero, w_er is undefined")
    w_er = lower_median([p.value_mu for p in pts]) / moments.mu_o
    sigma_n = lower_median([p.value_sigma for p in pts]) - moments.sigma_o
    return NoiseParams(w_er=w_er, sigma_n=sigma_n, n_points=len(pts))


def assemble_params(moments: HistoricalMoments, noise: NoiseParams) -> EfficientParams:
    mu_o, sigma_o = moments.mu_o, moments.sigma_o
    return EfficientParams(
        mu=mu_o * noise.w_er,
        sigma=sigma_o + noise.sigma_n,
        mu_n=mu_o * (noise.w_er - 1.0),
        mu_o=mu_o, sigma_o=sigma_o, w_er=noise.w_er, sigma_n=noise.sigma_n,
        p_n=moments.p_up,
    )


def surface_summary(values, reference: float | None = None) -> dict | None:
    """Min, quartiles and max of implied values, plus where ``reference`` falls.

    ``reference_percentile`` is the percentage of values strictly below the
    reference. Returns None for an empty input.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return None
    q = np.quantile(v, [0.25, 0.5, 0.75])
    out = {"n": int(v.size), "min": float(v.min()), "p25": float(q[0]),
           "p50": float(q[1]), "p75": float(q[2]), "max": float(v.max())}
    if reference is not None:
        out["reference"] = float(reference)
        out["reference_percentile"] = float(100.0 * np.mean(v < reference))
    return out


def merge_mu_sigma(mu_points: Sequence[ImpliedPoint],
                   sigma_points: Sequence[ImpliedPoint]) -> list[ImpliedPoint]:
    """Join separately stored mu and sigma surfaces on ``(expiry_days, strike)``."""
    sig = {(p.expiry_days, p.strike): p for p in sigma_points}
    out = []
    for p in mu_points:
        q = sig.get((p.expiry_days, p.strike))
        if q is None:
            continue
        out.append(ImpliedPoint(p.expiry_days, p.strike, p.moneyness,
                                value_mu=p.value_mu, value_sigma=q.value_sigma,
                                converged=p.converged and q.converged,
                                objective=max(p.objective, q.objective)))
    return out


# --------------------------------------------------------------------------
# serialization

SURFACE_COLUMNS = ("expiry_days", "strike", "moneyness", "value", "converged", "objective")


def write_surface_csv(points: Sequence[ImpliedPoint], path, field: str = "eps") -> None:
    attr = {"eps": "value_eps", "mu": "value_mu", "sigma": "value_sigma"}[field]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SURFACE_COLUMNS)
        for p in points:
            v = getattr(p, attr)
            w.writerow([p.expiry_days, repr(float(p.strike)), repr(float(p.moneyness)),
                        "" if v is None else repr(float(v)),
                        int(bool(p.converged)), repr(float(p.objective))])


def read_surface_csv(path, field: str = "eps") -> list[ImpliedPoint]:
    attr = {"eps": "value_eps", "mu": "value_mu", "sigma": "value_sigma"}[field]
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            v = row["value"]
            out.append(ImpliedPoint(
                expiry_days=int(row["expiry_days"]), strike=float(row["strike"]),
                moneyness=float(row["moneyness"]), converged=row["converged"] == "1",
                objective=float(row["objective"]),
                **{attr: None if v == "" else float(v)}))
    return out


def params_json(params: EfficientParams) -> str:
    return json.dumps(params.to_dict(), indent=2, sort_keys=True)
