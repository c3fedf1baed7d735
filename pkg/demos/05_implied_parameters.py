"""Backing eps, then (mu, sigma), out of individual option quotes.

A single quote pins down one combination of mu and sigma: along a curve
the price is unchanged. The solver reports the point on that curve nearest
its starting guess, and flags the quote when mu is locally unidentified.
"""
from mmnoise import calibration as cal
from mmnoise.analytic import bsm_noise_call
from mmnoise.marketdata import make_quote
from mmnoise.tree import price_european, tree_params

spot, rate, sigma = 100.0, 0.04 / 252, 0.0112

q = make_quote(21, 102.0, float(bsm_noise_call(spot, 102.0, 21, rate, sigma, 0.003)), spot)
pt = cal.implied_epsilon(q, spot, rate, sigma)
print(f"implied eps={pt.value_eps:.6f} converged={pt.converged}")

p_up, init = 0.524, (2.7e-4, 0.0112)
price = price_european(spot, 102.0, tree_params(3.0e-4, 0.0125, p_up, rate, 21))
pt = cal.implied_mu_sigma(make_quote(21, 102.0, price, spot), spot, rate, p_up, init)
print(f"implied mu={pt.value_mu:.3e} sigma={pt.value_sigma:.5f} mu_flat={pt.mu_flat}")
