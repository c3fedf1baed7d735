"""Closed-form call prices when a noise volatility rides on top of sigma.

The noise term only ever enters through the total volatility sigma + eps, so
a negative eps lowers the price and eps can be read off a quote just like an
implied volatility.
"""
from mmnoise.analytic import bsm_noise_call, market_price_of_risk

spot, strike, tau = 100.0, 100.0, 21.0          # 21 trading days
rate = 0.04 / 252                                # per day
sigma = 0.0112                                   # per sqrt(day)

print("eps        price")
for eps in (-0.004, 0.0, 0.002, 0.005):
    print(f"{eps:+.4f}   {bsm_noise_call(spot, strike, tau, rate, sigma, eps):.6f}")

# the same price from a single total volatility
print("sigma+eps folded:", bsm_noise_call(spot, strike, tau, rate, sigma + 0.005))

# market price of risk per unit of total volatility
print("theta:", market_price_of_risk(2.7e-4, rate, sigma, 0.0028))
