"""Self-consistent synthetic inputs for round-trip checks and demos.

A return history fixes the historical moments; a chain is then priced on the
drift-preserving tree with known efficient parameters, so a calibration run
over these files should recover them.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .marketdata import (OptionChain, ReturnSeries, daily_rate, make_quote, write_chain,
                         write_returns)
from .tree import price_european, tree_params
from .volmodels import HistoricalMoments, historical_moments


@dataclass(frozen=True)
class SyntheticCase:
    series: ReturnSeries
    moments: HistoricalMoments
    chain: OptionChain
    mu: float           # generating drift per day
    sigma: float        # generating volatility per sqrt(day)


def synthetic_returns(n: int = 1008, mu: float = 3e-4, sigma: float = 0.011,
                      seed: int = 5) -> ReturnSeries:
    rng = np.random.default_rng(seed)
    r = mu + sigma * rng.standard_normal(n)
    return ReturnSeries.from_returns(r, start=dt.date(2021, 4, 19))


def synthetic_case(w_er: float = 0.8, sigma_n: float = 1e-3, spot: float = 100.0,
                   annual_rate: float = 0.04, expiries=(5, 10, 21, 42, 63, 126),
                   moneyness=(0.9, 0.95, 1.0, 1.05, 1.1), n_returns: int = 1008,
                   seed: int = 5, n_steps: int | None = None) -> SyntheticCase:
    """Tree-priced chain whose generating ``(mu, sigma)`` is ``(w_er*mu_o, sigma_o + sigma_n)``."""
    series = synthetic_returns(n_returns, seed=seed)
    mom = historical_moments(series)
    mu, sigma = w_er * mom.mu_o, mom.sigma_o + sigma_n
    r = daily_rate(annual_rate)
    quotes = []
    for t in expiries:
        params = tree_params(mu, sigma, mom.p_up, r, t, n_steps)
        for m in moneyness:
            k = round(spot * m, 6)
            price = price_european(spot, k, params, method="terminal")
            quotes.append(make_quote(t, k, price, spot, volume=10, open_interest=100))
    chain = OptionChain("SYN", dt.date(2025, 4, 21), spot, annual_rate, tuple(quotes))
    return SyntheticCase(series, mom, chain, mu, sigma)


def write_case(case: SyntheticCase, directory) -> tuple[Path, Path]:
    """Write ``chain.csv`` and ``returns.csv``; returns their paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    chain_path, returns_path = d / "chain.csv", d / "returns.csv"
    write_chain(case.chain, chain_path)
    write_returns(case.series, returns_path)
    return chain_path, returns_path
