import json
import math

import numpy as np
import pytest
from scipy import stats

from mmnoise import volmodels as vm
from mmnoise.errors import (ConvergenceError, DegenerateVarianceError, DomainError,
                            InsufficientDataError)
from mmnoise.marketdata import ReturnSeries

TRUE = {"phi0": 0.0, "phi1": 0.0, "phi2": 0.0, "phi3": 0.0, "theta1": 0.0, "theta2": 0.0,
        "theta3": 0.0, "a0": 2e-6, "a1": 0.08, "beta1": 0.90, "nu": 8.0}


def test_constant_series_moments():
    m = vm.historical_moments(ReturnSeries.from_returns([0.01, 0.01, 0.01]))
    assert m.mu_o == 0.01 and m.sigma_o == 0.0 and m.p_up == 1.0


def test_two_point_moments():
    m = vm.historical_moments(ReturnSeries.from_returns([0.02, 0.00]))
    assert m.mu_o == pytest.approx(0.01, rel=1e-15)
    assert m.sigma_o == pytest.approx(math.sqrt(2) * 0.01, rel=1e-15)
    assert m.p_up == 0.5


def test_moments_order_invariant(rng):
    r = rng.normal(3e-4, 0.011, 1008)
    a = vm.historical_moments(r)
    b = vm.historical_moments(rng.permutation(r))
    assert a.mu_o == b.mu_o and a.p_up == b.p_up
    assert a.sigma_o == pytest.approx(b.sigma_o, rel=1e-14)


def test_moments_need_two_points():
    with pytest.raises(InsufficientDataError):
        vm.historical_moments([0.1])


def _random_valid(rng):
    p = np.zeros(vm.N_PARAMS)
    p[0] = rng.normal(0, 1e-3)
    p[1:4] = rng.uniform(-0.2, 0.2, 3)
    p[4:7] = rng.uniform(-0.2, 0.2, 3)
    p[7] = rng.uniform(1e-6, 1e-5)
    a1 = rng.uniform(0.01, 0.3)
    p[8], p[9] = a1, rng.uniform(0.0, 0.95 - a1)
    p[10] = rng.uniform(3.0, 30.0)
    return p


def test_gradient_matches_central_differences(rng):
    r = vm.simulate_arma_garch(TRUE, 600, seed=3)
    for _ in range(20):
        p = _random_valid(rng)
        _, g = vm.garch_nll_grad(p, r)
        fd = np.empty_like(g)
        for i in range(p.size):
            h = 1e-6 * max(abs(p[i]), 1e-3 if i != 7 else 1e-6)
            up, dn = p.copy(), p.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (vm.garch_nll(up, r) - vm.garch_nll(dn, r)) / (2 * h)
        assert np.linalg.norm(g - fd) <= 1e-5 * np.linalg.norm(g)


def test_constant_variance_reduces_to_student_t():
    r = vm.simulate_arma_garch(TRUE, 400, seed=1)
    p = dict(TRUE, phi0=1e-4, a1=0.0, beta1=0.0, a0=1.5e-4, nu=6.0)
    e = r[vm.AR_ORDER:] - 1e-4
    scale = math.sqrt(1.5e-4 * (6.0 - 2.0) / 6.0)
    oracle = -np.sum(stats.t.logpdf(e / scale, 6.0) - math.log(scale))
    assert vm.garch_nll(p, r) == pytest.approx(oracle, rel=1e-12)


def test_true_params_beat_perturbed():
    r = vm.simulate_arma_garch(TRUE, 10_000, seed=11)
    bumped = dict(TRUE, a1=TRUE["a1"] + 0.1, beta1=TRUE["beta1"] - 0.1)
    assert vm.garch_nll(TRUE, r) <= vm.garch_nll(bumped, r)
    bumped = dict(TRUE, a1=0.18, beta1=0.80)
    assert vm.garch_nll(TRUE, r) <= vm.garch_nll(bumped, r)


def test_invalid_params_rejected():
    with pytest.raises(DomainError):
        vm.garch_nll(dict(TRUE, a1=0.5, beta1=0.6), np.zeros(300))
    with pytest.raises(DomainError):
        vm.garch_nll(dict(TRUE, nu=2.0), np.zeros(300))


def test_reparametrization_round_trip(rng):
    for _ in range(10):
        p = _random_valid(rng)
        np.testing.assert_allclose(vm.from_unconstrained(vm.to_unconstrained(p)), p, rtol=1e-12)


@pytest.fixture(scope="module")
def small_fit():
    r = vm.simulate_arma_garch(TRUE, 3000, seed=5)
    return r, vm.fit_arma_garch(ReturnSeries.from_returns(r))


def test_fit_is_local_minimum(small_fit):
    r, fit = small_fit
    base = vm.garch_nll(fit.params, r)
    assert fit.loglik == pytest.approx(-base)
    for i in range(vm.N_PARAMS):
        for sgn in (1, -1):
            p = fit.params.copy()
            p[i] += sgn * 1e-3 * max(abs(p[i]), 1e-3 if i != 7 else 1e-7)
            try:
                assert vm.garch_nll(p, r) >= base - 1e-9
            except DomainError:
                pass


def test_fit_invariants(small_fit):
    r, fit = small_fit
    assert fit.a1 + fit.beta1 < 1
    assert fit.nu > 2
    assert np.all(fit.sigma_path > 0)
    assert fit.sigma_forecast == fit.sigma_path[-1]
    d = json.loads(fit.to_json())
    assert set(vm.PARAM_NAMES) <= set(d)
    assert {"loglik", "sigma_forecast", "p_values"} <= set(d)
    assert all(0 <= v <= 1 for v in d["p_values"].values() if v is not None)


def test_fit_errors():
    with pytest.raises(DegenerateVarianceError):
        vm.fit_arma_garch(np.full(500, 0.01))
    with pytest.raises(InsufficientDataError):
        vm.fit_arma_garch(np.zeros(100))


def test_budget_exhaustion_raises_with_best_iterate():
    r = vm.simulate_arma_garch(TRUE, 2000, seed=2)
    with pytest.raises(ConvergenceError) as info:
        vm.fit_arma_garch(r, max_iter=3)
    assert info.value.best is not None and len(info.value.best) == vm.N_PARAMS
