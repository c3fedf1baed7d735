"""Simulating the spot with a Tanaka-type noise increment.

H_t = int sgn(B) dB is itself a Brownian motion. With the sign absorbed into
eps the simulated prices match the closed form at total volatility
sigma + eps; the literal constant-eps reading does not.
"""
import numpy as np
from scipy import stats

from mmnoise.analytic import bsm_noise_call
from mmnoise.noise_sim import PathConfig, mc_call_price, simulate_H

h = simulate_H(1.0, 500, seed=1, n_paths=5000)[:, -1]
print("H_T mean/var:", h.mean().round(4), h.var().round(4),
      " KS p-value:", round(stats.kstest(h, "norm").pvalue, 3))

closed = bsm_noise_call(100.0, 100.0, 1.0, 0.0, 0.15, 0.05)
for noise in ("absorbed", "literal"):
    cfg = PathConfig(100.0, 0.0, 0.15, 0.05, 1.0, 100, seed=7, noise=noise)
    est = mc_call_price(cfg, 100.0, rate=0.0, n_paths=200_000)
    print(f"{noise:9s} MC={est.price:.4f} +/- {est.standard_error:.4f}   closed={closed:.4f}")
