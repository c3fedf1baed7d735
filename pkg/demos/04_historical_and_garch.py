"""Historical moments and an ARMA(3,3)-GARCH(1,1)-t fit of a return series."""
from mmnoise.marketdata import ReturnSeries
from mmnoise.volmodels import fit_arma_garch, historical_moments, simulate_arma_garch

truth = dict(phi0=2e-4, phi1=0.0, phi2=0.0, phi3=0.0, theta1=0.0, theta2=0.0, theta3=0.0,
             a0=2e-6, a1=0.08, beta1=0.90, nu=8.0)
series = ReturnSeries.from_returns(simulate_arma_garch(truth, 5000, seed=3))

mom = historical_moments(series)
print(f"mu_o={mom.mu_o:.3e} sigma_o={mom.sigma_o:.4f} p_up={mom.p_up:.3f}")

fit = fit_arma_garch(series)
print(f"a1={fit.a1:.3f} beta1={fit.beta1:.3f} nu={fit.nu:.2f} converged={fit.converged}")
print(f"sigma forecast={fit.sigma_forecast:.4f}")
for name, pv in fit.p_values.items():
    print(f"  {name:7s} p={pv:.3g}")
