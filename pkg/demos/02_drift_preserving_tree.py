"""A binomial tree whose option prices keep a dependence on the drift.

With the real-world up-probability p fixed and the step sizes matched to
mu and sigma, the risk-neutral probability becomes
q = p - theta*sqrt(p(1-p)dt). Prices move with mu at any finite step count
and converge to the closed form as the steps shrink.
"""
from mmnoise.analytic import bsm_noise_call
from mmnoise.tree import price_european, tree_params

spot, strike, days = 100.0, 100.0, 21.0
rate, sigma, p_up = 0.04 / 252, 0.0112, 0.524

for mu in (rate, 2.7e-4, 5e-4):
    params = tree_params(mu, sigma, p_up, rate, days)
    print(f"mu={mu:.2e}  q={params.q:.5f}  call={price_european(spot, strike, params):.6f}")

closed = bsm_noise_call(spot, strike, days, rate, sigma)
for n in (21, 210, 2100):
    params = tree_params(rate, sigma, 0.5, rate, days, n)
    c = price_european(spot, strike, params)
    print(f"n={n:5d}  tree={c:.6f}  closed={closed:.6f}  rel.err={abs(c - closed) / closed:.1e}")
