"""Closed-form call pricing with noise-augmented volatility.

With constant coefficients the noise term only enters the price through the
total volatility ``sigma + epsilon``; ``epsilon`` may be negative as long as the
total stays positive. All rates and volatilities share one time unit (trading
days throughout this package).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError


def norm_cdf(x):
    """Standard normal CDF.

    Backed by the Cephes ``ndtr`` routine (erf/erfc based), accurate to a few
    ulp over the whole real line.
    """
    return ndtr(x)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def _total_vol(sigma, epsilon):
    vol = np.asarray(sigma, dtype=float) + np.asarray(epsilon, dtype=float)
    if np.any(~(vol > 0)):
        raise DomainError("total volatility sigma + epsilon must be positive")
    return vol


def bsm_call(spot, strike, tau, rate, vol):
    """Black-Scholes-Merton call price; broadcasts over array arguments."""
    spot, strike, tau, rate, vol = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (spot, strike, tau, rate, vol)))
    if np.any(~(spot > 0)) or np.any(~(tau > 0)) or np.any(strike < 0):
        raise DomainError("require spot > 0, tau > 0, strike >= 0")
    if np.any(~(vol > 0)):
        raise DomainError("volatility must be positive")
    sqt = vol * np.sqrt(tau)
    pos = strike > 0
    safe_k = np.where(pos, strike, 1.0)
    with np.errstate(divide="ignore"):
        u_plus = (np.log(spot / safe_k) + (rate + 0.5 * vol * vol) * tau) / sqt
    u_minus = u_plus - sqt
    price = spot * norm_cdf(u_plus) - np.exp(-rate * tau) * strike * norm_cdf(u_minus)
    # K -> 0+ limit is the spot itself
    price = np.where(pos, price, spot)
    # clip roundoff below intrinsic / above spot
    lower = np.maximum(spot - strike * np.exp(-rate * tau), 0.0)
    price = np.clip(price, lower, spot)
    return price[()] if price.ndim == 0 else price


def bsm_noise_call(spot, strike, tau, rate, sigma, epsilon=0.0):
    """Call price under total volatility ``sigma + epsilon``.

    Parameters
    ----------
    spot, strike : float or array
    tau : float or array
        Time to expiry in the same unit as ``rate`` and the volatilities.
    rate : float or array
        Riskless rate per unit time.
    sigma, epsilon : float or array
        Spot volatility and noise volatility per sqrt(unit time).
    """
    return bsm_call(spot, strike, tau, rate, _total_vol(sigma, epsilon))


def bsm_vega(spot, strike, tau, rate, vol):
    """dC/dvol."""
    spot, strike, tau, rate, vol = (np.asarray(a, dtype=float) for a in (spot, strike, tau, rate, vol))
    sqt = vol * np.sqrt(tau)
    u_plus = (np.log(spot / strike) + (rate + 0.5 * vol * vol) * tau) / sqt
    return spot * norm_pdf(u_plus) * np.sqrt(tau)


def market_price_of_risk(mu, rate, sigma, epsilon=0.0):
    """Excess drift per unit of total volatility, ``(mu - r) / (sigma + epsilon)``."""
    vol = _total_vol(sigma, epsilon)
    out = (np.asarray(mu, dtype=float) - rate) / vol
    return out[()] if out.ndim == 0 else out


def no_arbitrage_bounds(spot, strike, tau, rate):
    """(lower, upper) bounds on a European call price."""
    lower = np.maximum(spot - strike * np.exp(-rate * tau), 0.0)
    return lower, spot


@dataclass(frozen=True)
class NoisePricingInputs:
    spot: float
    strike: float
    tau: float
    rate: float
    sigma: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (self.spot > 0 and self.strike > 0 and self.tau > 0):
            raise DomainError("require spot > 0, strike > 0, tau > 0")
        if not self.sigma + self.epsilon > 0:
            raise DomainError("total volatility sigma + epsilon must be positive")

    @property
    def total_vol(self) -> float:
        return self.sigma + self.epsilon

    def call_price(self) -> float:
        return float(bsm_noise_call(self.spot, self.strike, self.tau, self.rate,
                                    self.sigma, self.epsilon))
