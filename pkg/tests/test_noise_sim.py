import math

import numpy as np
import pytest
from scipy import stats

from mmnoise import noise_sim as ns
from mmnoise.analytic import bsm_noise_call


def test_sign_convention():
    assert list(ns.sgn(np.array([-2.0, 0.0, 3.0]))) == [-1.0, 0.0, 1.0]


def test_first_increment_consumed_by_sign_at_zero():
    h = ns.h_from_increments(np.array([0.3]))
    assert list(h) == [0.0, 0.0]
    h = ns.h_from_increments(np.array([0.3, -0.5, 0.1]))
    # B = 0, 0.3, -0.2 -> signs 0, +1, -1
    np.testing.assert_allclose(h, [0.0, 0.0, -0.5, -0.6])


def test_h_martingale_and_variance():
    n, steps = 100_000, 200
    ht = ns.simulate_H(1.0, steps, seed=4, n_paths=n)[:, -1]
    se_mean = ht.std(ddof=1) / math.sqrt(n)
    assert abs(ht.mean()) < 3 * se_mean
    var = ht.var(ddof=1)
    se_var = math.sqrt(np.var((ht - ht.mean()) ** 2, ddof=1) / n)
    assert abs(var - 1.0) < 3 * se_var


def test_h_is_normal_ks():
    ht = ns.simulate_H(2.0, 500, seed=9, n_paths=10_000)[:, -1]
    assert stats.kstest(ht, stats.norm(scale=math.sqrt(2.0)).cdf).pvalue > 0.01


def test_noise_free_path_is_deterministic():
    cfg = ns.PathConfig(100.0, 1e-3, 0.0, 0.0, 10.0, 10, seed=1)
    path = ns.simulate_path(cfg)
    np.testing.assert_allclose(path.spots, 100.0 * (1 + 1e-3) ** np.arange(11), rtol=1e-14)
    assert not path.floored


def test_same_seed_same_path():
    cfg = ns.PathConfig(100.0, 2e-4, 0.011, 0.003, 21.0, 21, seed=42)
    a, b = ns.simulate_path(cfg, 7), ns.simulate_path(cfg, 7)
    assert np.array_equal(a.spots, b.spots)
    assert not np.array_equal(a.spots, ns.simulate_path(cfg, 8).spots)


def test_path_matches_batch():
    cfg = ns.PathConfig(100.0, 2e-4, 0.011, 0.003, 21.0, 21, seed=42)
    term, _ = ns.simulate_terminal(cfg, 20)
    for i in (0, 1, 6, 13):
        assert ns.simulate_path(cfg, i).spots[-1] == term[i // 2, i % 2]


def test_workers_do_not_change_results():
    cfg = ns.PathConfig(100.0, 2e-4, 0.011, 0.003, 21.0, 21, seed=3)
    a, _ = ns.simulate_terminal(cfg, 3 * ns.PAIRS_PER_BLOCK * 2 + 10, workers=1)
    b, _ = ns.simulate_terminal(cfg, 3 * ns.PAIRS_PER_BLOCK * 2 + 10, workers=3)
    assert np.array_equal(a, b)


def test_log_terminal_mean_matches_gbm():
    mu, sigma, T = 0.05, 0.2, 1.0
    cfg = ns.PathConfig(100.0, mu, sigma, 0.0, T, 252, seed=12)
    term, _ = ns.simulate_terminal(cfg, 100_000)
    pairs = np.log(term).mean(axis=1)
    se = pairs.std(ddof=1) / math.sqrt(pairs.size)
    assert abs(pairs.mean() - (math.log(100.0) + (mu - sigma ** 2 / 2) * T)) < 3 * se


def test_zero_strike_is_spot():
    cfg = ns.PathConfig(100.0, 0.0, 0.2, 0.0, 1.0, 50, seed=5)
    est = ns.mc_call_price(cfg, 0.0, rate=0.0, n_paths=20_000)
    assert abs(est.price - 100.0) <= 3 * est.standard_error + 1e-9


def test_noise_folds_into_volatility():
    r = 0.04 / 252
    a = ns.mc_call_price(ns.PathConfig(100.0, 0.0, 0.0112, 0.005, 21.0, 21, seed=1),
                         100.0, rate=r, n_paths=200_000)
    b = ns.mc_call_price(ns.PathConfig(100.0, 0.0, 0.0162, 0.0, 21.0, 21, seed=2),
                         100.0, rate=r, n_paths=200_000)
    assert abs(a.price - b.price) < 3 * math.hypot(a.standard_error, b.standard_error)


def test_literal_reading_lowers_volatility():
    cfg = ns.PathConfig(100.0, 0.0, 0.15, 0.05, 1.0, 100, seed=1, noise="literal")
    est = ns.mc_call_price(cfg, 100.0, rate=0.0, n_paths=100_000)
    closed = float(bsm_noise_call(100.0, 100.0, 1.0, 0.0, 0.15, 0.05))
    assert est.price < closed - 10 * est.standard_error


def test_standard_error_scales_inverse_sqrt():
    cfg = ns.PathConfig(100.0, 0.0, 0.2, 0.0, 1.0, 20, seed=8)
    small = ns.mc_call_price(cfg, 100.0, n_paths=20_000)
    big = ns.mc_call_price(cfg, 100.0, n_paths=320_000)
    slope = math.log(big.standard_error / small.standard_error) / math.log(16.0)
    assert slope == pytest.approx(-0.5, abs=0.05)


def test_floor_and_flag():
    cfg = ns.PathConfig(100.0, 0.0, 3.0, 0.0, 1.0, 4, seed=0)
    term, flags = ns.simulate_terminal(cfg, 2000)
    assert flags.any()
    assert np.all(term > 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ns.PathConfig(100.0, 0.0, 0.1, 0.0, 1.0, 0)
    with pytest.raises(ValueError):
        ns.PathConfig(100.0, 0.0, 0.1, 0.0, 1.0, 5, noise="other")
    with pytest.raises(ValueError):
        ns.mc_call_price(ns.PathConfig(100.0, 0.0, 0.1, 0.0, 1.0, 5), 100.0, n_paths=10)
