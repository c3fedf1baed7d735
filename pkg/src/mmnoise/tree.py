"""Drift-preserving binomial lattice.

Up/down returns are fixed by matching the per-step mean ``mu*dt`` and variance
``sigma**2*dt`` under the real-world up-probability ``p``; the risk-neutral
probability is ``q = p - theta*sqrt(p*(1-p)*dt)`` with ``theta = (mu - r)/sigma``.
Because ``q`` and the node returns both depend on ``mu`` and ``p``, so does the
option price at any finite number of steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .errors import ArbitrageError, DomainError


@dataclass(frozen=True)
class TreeParams:
    mu: float
    sigma: float
    p_up: float
    rate: float
    dt: float
    n_steps: int
    u: float
    d: float
    q: float

    @property
    def theta(self) -> float:
        return (self.mu - self.rate) / self.sigma

    @property
    def maturity(self) -> float:
        return self.dt * self.n_steps


def tree_params(mu, sigma, p_up, rate, maturity_days, n_steps=None) -> TreeParams:
    """Build lattice parameters; ``n_steps`` defaults to one step per day."""
    if n_steps is None:
        n_steps = max(int(round(maturity_days)), 1)
    n_steps = int(n_steps)
    if not 0 < p_up < 1:
        raise DomainError(f"p_up must lie in (0, 1), got {p_up}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    if not maturity_days > 0:
        raise DomainError(f"maturity must be positive, got {maturity_days}")
    dt = maturity_days / n_steps
    sdt = math.sqrt(dt)
    u = mu * dt + math.sqrt((1 - p_up) / p_up) * sigma * sdt
    d = mu * dt - math.sqrt(p_up / (1 - p_up)) * sigma * sdt
    theta = (mu - rate) / sigma
    q = p_up - theta * math.sqrt(p_up * (1 - p_up) * dt)
    return TreeParams(mu=mu, sigma=sigma, p_up=p_up, rate=rate, dt=dt,
                      n_steps=n_steps, u=u, d=d, q=q)


def check_no_arbitrage(params: TreeParams) -> bool:
    """Strict ``d < r*dt < u``."""
    r_dt = params.rate * params.dt
    return params.d < r_dt < params.u


def _terminal_spots(spot, params):
    if params.d <= -1.0:
        raise DomainError(f"down return {params.d} <= -1 gives nonpositive node prices")
    n = params.n_steps
    j = np.arange(n + 1, dtype=float)
    return spot * np.exp(j * math.log1p(params.u) + (n - j) * math.log1p(params.d))


def price_european(spot, strike, params: TreeParams, method="backward") -> float:
    """European call by risk-neutral backward induction.

    ``method="backward"`` runs the recursion on one length-(n+1) buffer;
    ``method="terminal"`` evaluates the same discounted expectation directly
    from binomial weights in O(n) time, which is what calibration loops use.
    """
    if not check_no_arbitrage(params):
        raise ArbitrageError(
            f"no-arbitrage violated: d={params.d}, r*dt={params.rate * params.dt}, u={params.u}")
    if not spot > 0 or strike < 0:
        raise DomainError("require spot > 0 and strike >= 0")
    n, q = params.n_steps, params.q
    growth = 1.0 + params.rate * params.dt
    values = _terminal_spots(spot, params)
    np.subtract(values, strike, out=values)
    np.maximum(values, 0.0, out=values)

    if method == "terminal":
        weights = binom.pmf(np.arange(n + 1), n, q)
        return float(math.fsum(weights * values) / growth**n)
    if method != "backward":
        raise ValueError(f"unknown method {method!r}")

    disc_up, disc_down = q / growth, (1.0 - q) / growth
    for k in range(n, 0, -1):
        up = values[1:k + 1] * disc_up
        values[:k] *= disc_down
        values[:k] += up
    return float(values[0])
