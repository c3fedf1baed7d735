"""Historical moments and ARMA(3,3)-GARCH(1,1) estimation with Student-t innovations.

Model for a return series ``r_s``::

    r_s       = phi0 + sum_i phi_i r_{s-i} + a_s + sum_j theta_j a_{s-j}
    a_s       = sigma_s * xi_s,     xi_s ~ standardized t(nu)
    sigma_s^2 = a0 + a1 a_{s-1}^2 + beta1 sigma_{s-1}^2

The likelihood conditions on the first three observations with pre-sample
innovations set to zero, and starts the variance recursion at the mean
squared residual.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats
from scipy.signal import lfilter
from scipy.special import gammaln, psi

from .errors import ConvergenceError, DegenerateVarianceError, DomainError, InsufficientDataError
from .marketdata import ReturnSeries

AR_ORDER = 3
MA_ORDER = 3
PARAM_NAMES = ("phi0", "phi1", "phi2", "phi3", "theta1", "theta2", "theta3",
               "a0", "a1", "beta1", "nu")
N_PARAMS = len(PARAM_NAMES)
MIN_WINDOW = 200
MAX_ITER = 2000
GTOL = 1e-6


@dataclass(frozen=True)
class HistoricalMoments:
    mu_o: float
    sigma_o: float
    p_up: float
    window: int = 0


def historical_moments(series, dt: float = 1.0) -> HistoricalMoments:
    """Sample drift, volatility and up-fraction of a daily return series.

    ``mu_o = sum(r) / (M dt)`` and ``sigma_o**2 = sum((r - mu_o dt)**2) / ((M-1) dt)``.
    ``p_up`` is the fraction of strictly positive returns.
    """
    r = np.asarray(series.returns if isinstance(series, ReturnSeries) else series, dtype=float)
    m = r.size
    if m < 2:
        raise InsufficientDataError(f"need at least 2 returns, got {m}")
    mean_r = math.fsum(r) / m
    mu_o = mean_r / dt
    var = math.fsum((r - mean_r) ** 2) / ((m - 1) * dt)
    p_up = int(np.count_nonzero(r > 0)) / m
    return HistoricalMoments(mu_o=mu_o, sigma_o=math.sqrt(var), p_up=p_up, window=m)


# --------------------------------------------------------------------------
# likelihood


def _returns_array(series):
    return np.asarray(series.returns if isinstance(series, ReturnSeries) else series, dtype=float)


def _as_param_vector(params):
    if isinstance(params, dict):
        params = [params[k] for k in PARAM_NAMES]
    p = np.asarray(params, dtype=float)
    if p.shape != (N_PARAMS,):
        raise DomainError(f"expected {N_PARAMS} parameters {PARAM_NAMES}, got shape {p.shape}")
    return p


def _check_constraints(p):
    a0, a1, b1, nu = p[7:]
    if not (a0 >= 0 and a1 >= 0 and b1 >= 0):
        raise DomainError("GARCH coefficients must be nonnegative")
    if not a1 + b1 < 1:
        raise DomainError("a1 + beta1 must be < 1")
    if not nu > 2:
        raise DomainError("nu must exceed 2")
    if not np.all(np.isfinite(p)):
        raise DomainError("non-finite parameter")


def _lagged(x, lag):
    out = np.zeros_like(x)
    out[..., lag:] = x[..., :-lag]
    return out


def _filter(p, r, want_grad):
    """Residuals, variances and (optionally) their parameter derivatives."""
    phi0, phi, theta = p[0], p[1:4], p[4:7]
    a0, a1, b1 = p[7:10]
    ar_den = np.concatenate(([1.0], theta))
    x = r[AR_ORDER:] - phi0
    for i in range(1, AR_ORDER + 1):
        x = x - phi[i - 1] * r[AR_ORDER - i:-i]
    e = lfilter([1.0], ar_den, x)
    m = e.size

    # pre-sample variance h0 = mean residual square, pre-sample innovation 0
    h0 = float(np.mean(e * e))
    e_prev2 = np.concatenate(([0.0], e[:-1] ** 2))
    h = lfilter([1.0], [1.0, -b1], a0 + a1 * e_prev2, zi=[b1 * h0])[0]
    if not want_grad:
        return e, h, None, None

    # d e / d (phi0, phi1..3, theta1..3)
    src = np.empty((7, m))
    src[0] = -1.0
    for i in range(1, AR_ORDER + 1):
        src[i] = -r[AR_ORDER - i:-i]
    for j in range(1, MA_ORDER + 1):
        src[3 + j] = -_lagged(e, j)
    de = lfilter([1.0], ar_den, src, axis=1)

    # nu does not enter h; rows are the first 10 parameters
    drive = np.zeros((N_PARAMS - 1, m))
    drive[:7, 1:] = 2.0 * a1 * e[:-1] * de[:, :-1]
    drive[7] = 1.0
    drive[8] = e_prev2
    drive[9, 0] = h0
    drive[9, 1:] = h[:-1]
    init = np.zeros(N_PARAMS - 1)
    init[:7] = 2.0 * np.mean(e * de, axis=1)     # d h0
    dh = lfilter([1.0], [1.0, -b1], drive, axis=1, zi=(b1 * init)[:, None])[0]
    return e, h, de, dh


def _nll_core(p, r, want_grad):
    e, h, de, dh = _filter(p, r, want_grad)
    if not np.all(h > 0) or not np.all(np.isfinite(e)):
        raise DomainError("conditional variance nonpositive or residuals non-finite")
    nu = p[10]
    z = e * e / ((nu - 2.0) * h)
    const = gammaln((nu + 1) / 2) - gammaln(nu / 2) - 0.5 * math.log(math.pi * (nu - 2))
    ll = const - 0.5 * np.log(h) - 0.5 * (nu + 1) * np.log1p(z)
    nll = -math.fsum(ll)
    if not want_grad:
        return nll, None, e, h
    d_e = (nu + 1) * e / ((nu - 2) * h * (1 + z))
    d_h = 0.5 / h - 0.5 * (nu + 1) * z / (h * (1 + z))
    grad = np.empty(N_PARAMS)
    grad[:7] = de @ d_e + dh[:7] @ d_h
    grad[7:10] = dh[7:10] @ d_h
    d_nu = -(0.5 * psi((nu + 1) / 2) - 0.5 * psi(nu / 2) - 0.5 / (nu - 2)
             - 0.5 * np.log1p(z) + 0.5 * (nu + 1) * z / ((nu - 2) * (1 + z)))
    grad[10] = d_nu.sum()
    return nll, grad, e, h


def garch_nll(params, series) -> float:
    """Negative log-likelihood of the ARMA(3,3)-GARCH(1,1)-t model.

    ``params`` is a length-11 vector ordered as ``PARAM_NAMES`` or a dict
    keyed by those names. Raises DomainError outside the admissible region.
    """
    p = _as_param_vector(params)
    _check_constraints(p)
    return _nll_core(p, _returns_array(series), False)[0]


def garch_nll_grad(params, series) -> tuple[float, np.ndarray]:
    """NLL and its analytic gradient with respect to the natural parameters."""
    p = _as_param_vector(params)
    _check_constraints(p)
    nll, grad, _, _ = _nll_core(p, _returns_array(series), True)
    return nll, grad


def conditional_sigma(params, series) -> np.ndarray:
    p = _as_param_vector(params)
    _check_constraints(p)
    _, h = _filter(p, _returns_array(series), False)[:2]
    return np.sqrt(h)


# --------------------------------------------------------------------------
# unconstrained reparametrization


def to_unconstrained(p):
    p = np.asarray(p, dtype=float)
    a0, a1, b1, nu = p[7:]
    rest = 1.0 - a1 - b1
    z = np.empty(N_PARAMS)
    z[:7] = p[:7]
    z[7] = math.log(a0)
    z[8] = math.log(a1 / rest)
    z[9] = math.log(b1 / rest)
    z[10] = math.log(nu - 2.0)
    return z


def from_unconstrained(z):
    z = np.asarray(z, dtype=float)
    p = np.empty(N_PARAMS)
    p[:7] = z[:7]
    p[7] = math.exp(z[7])
    top = max(z[8], z[9], 0.0)
    w1, w2, w0 = math.exp(z[8] - top), math.exp(z[9] - top), math.exp(-top)
    s = w0 + w1 + w2
    p[8] = w1 / s
    p[9] = w2 / s
    p[10] = 2.0 + math.exp(z[10])
    return p


def _chain_rule(p, grad):
    g = grad.copy()
    a1, b1 = p[8], p[9]
    g[7] = grad[7] * p[7]
    g[8] = grad[8] * a1 * (1 - a1) - grad[9] * a1 * b1
    g[9] = -grad[8] * a1 * b1 + grad[9] * b1 * (1 - b1)
    g[10] = grad[10] * (p[10] - 2.0)
    return g


# --------------------------------------------------------------------------
# fitting


@dataclass
class ArmaGarchFit:
    phi: np.ndarray
    theta: np.ndarray
    a0: float
    a1: float
    beta1: float
    nu: float
    loglik: float
    p_values: dict
    std_errors: dict
    sigma_path: np.ndarray
    sigma_forecast: float
    n_iter: int = 0
    grad_norm: float = math.nan
    message: str = ""
    converged: bool = True      # max |grad| <= gtol at the returned point

    @property
    def params(self) -> np.ndarray:
        return np.concatenate((self.phi, self.theta, [self.a0, self.a1, self.beta1, self.nu]))

    @property
    def persistence(self) -> float:
        return self.a1 + self.beta1

    def to_dict(self) -> dict:
        out = {name: float(v) for name, v in zip(PARAM_NAMES, self.params)}
        out["loglik"] = float(self.loglik)
        out["sigma_forecast"] = float(self.sigma_forecast)
        out["p_values"] = {k: _json_float(v) for k, v in self.p_values.items()}
        out["std_errors"] = {k: _json_float(v) for k, v in self.std_errors.items()}
        out["n_iter"] = int(self.n_iter)
        out["grad_norm"] = float(self.grad_norm)
        out["converged"] = bool(self.converged)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else None


def initial_params(series) -> np.ndarray:
    r = _returns_array(series)
    p = np.zeros(N_PARAMS)
    p[7] = 0.1 * float(np.var(r))
    p[8] = 0.05
    p[9] = 0.90
    p[10] = 8.0
    return p


def _numerical_hessian(fun_grad, x, rel_step=1e-5):
    n = x.size
    hess = np.empty((n, n))
    for i in range(n):
        h = rel_step * max(abs(x[i]), 1e-2)
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        hess[i] = (fun_grad(xp) - fun_grad(xm)) / (2 * h)
    return 0.5 * (hess + hess.T)


def fit_arma_garch(series, max_iter: int = MAX_ITER, gtol: float = GTOL) -> ArmaGarchFit:
    """Maximum-likelihood ARMA(3,3)-GARCH(1,1)-t fit.

    Optimizes the per-observation NLL with BFGS over an unconstrained
    reparametrization (log a0, multinomial-logit (a1, beta1), log(nu - 2)) on
    internally standardized returns, so the gradient tolerance is free of both
    the return scale and the sample length. Standard errors come
    from a finite-difference Hessian of the analytic gradient.

    Raises
    ------
    InsufficientDataError
        Fewer than 200 observations.
    DegenerateVarianceError
        The series has zero variance.
    ConvergenceError
        The iteration budget ran out, or no finite likelihood was reached;
        ``.best`` carries the last iterate.

    Notes
    -----
    A line-search stop short of ``gtol`` (typical when the optimum sits on a
    flat boundary such as ``nu -> inf`` for Gaussian data) is not an error:
    the fit is returned with ``converged=False`` and its ``grad_norm``.
    """
    r = _returns_array(series)
    if r.size < MIN_WINDOW:
        raise InsufficientDataError(f"need at least {MIN_WINDOW} returns, got {r.size}")
    scale = float(np.std(r))
    if not scale > 0:
        raise DegenerateVarianceError("return series has zero variance")
    y = r / scale

    m = y.size - AR_ORDER

    def objective(z):
        p = from_unconstrained(z)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                nll, grad, _, _ = _nll_core(p, y, True)
        except DomainError:
            return np.inf, np.zeros(N_PARAMS)
        if not (np.isfinite(nll) and np.all(np.isfinite(grad))):
            return np.inf, np.zeros(N_PARAMS)
        # per-observation scale keeps the gradient tolerance independent of length
        return nll / m, _chain_rule(p, grad) / m

    z0 = to_unconstrained(initial_params(y))
    res = optimize.minimize(objective, z0, jac=True, method="BFGS",
                            options={"gtol": gtol, "maxiter": max_iter})
    # BFGS can stop on line-search precision loss right at the optimum;
    # restarting with a fresh inverse Hessian settles those cases.
    n_iter = res.nit
    for _ in range(5):
        if res.success or not np.isfinite(res.fun) or n_iter >= max_iter:
            break
        res = optimize.minimize(objective, res.x, jac=True, method="BFGS",
                                options={"gtol": gtol, "maxiter": max_iter - n_iter})
        n_iter += res.nit
    grad_norm = float(np.max(np.abs(objective(res.x)[1])))
    p_scaled = from_unconstrained(res.x)
    best = _unscale(p_scaled, scale)
    converged = grad_norm <= gtol
    if not converged and (n_iter >= max_iter or not np.isfinite(res.fun)):
        raise ConvergenceError(
            f"ARMA-GARCH fit did not reach gradient tolerance {gtol} within "
            f"{max_iter} iterations (max |grad| = {grad_norm:.3g}): {res.message}", best=best)

    hess = _numerical_hessian(lambda x: _nll_core(x, y, True)[1], p_scaled)
    try:
        cov_scaled = np.linalg.inv(hess)
        var_scaled = np.diag(cov_scaled)
    except np.linalg.LinAlgError:
        var_scaled = np.full(N_PARAMS, np.nan)
    with np.errstate(invalid="ignore"):
        se_scaled = np.where(var_scaled > 0, np.sqrt(np.abs(var_scaled)), np.nan)
        zstat = p_scaled / se_scaled
    pvals = 2.0 * stats.norm.sf(np.abs(zstat))
    se = se_scaled * _unit_scale(scale)

    nll, _, e, h = _nll_core(best, r, False)
    sigma = np.sqrt(h)
    return ArmaGarchFit(
        phi=best[:4].copy(), theta=best[4:7].copy(),
        a0=float(best[7]), a1=float(best[8]), beta1=float(best[9]), nu=float(best[10]),
        loglik=-nll,
        p_values=dict(zip(PARAM_NAMES, map(float, pvals))),
        std_errors=dict(zip(PARAM_NAMES, map(float, se))),
        sigma_path=sigma, sigma_forecast=float(sigma[-1]),
        n_iter=int(n_iter), grad_norm=grad_norm, message=str(res.message),
        converged=bool(converged),
    )


def _unit_scale(scale):
    """Factor mapping each parameter from standardized to original units."""
    f = np.ones(N_PARAMS)
    f[0] = scale
    f[7] = scale * scale
    return f


def _unscale(p_scaled, scale):
    return p_scaled * _unit_scale(scale)


def simulate_arma_garch(params, n: int, seed: int = 0, burn: int = 1000) -> np.ndarray:
    """Draw ``n`` returns from the model with standardized-t innovations."""
    p = _as_param_vector(params)
    _check_constraints(p)
    phi0, phi, theta = p[0], p[1:4], p[4:7]
    a0, a1, b1, nu = p[7:]
    rng = np.random.default_rng(seed)
    total = n + burn
    xi = rng.standard_t(nu, size=total) * math.sqrt((nu - 2) / nu)
    r = np.zeros(total + AR_ORDER)
    a = np.zeros(total + MA_ORDER)
    h = a0 / (1 - a1 - b1) if a1 + b1 < 1 else a0
    a_prev = 0.0
    for s in range(total):
        h = a0 + a1 * a_prev * a_prev + b1 * h
        a_s = math.sqrt(h) * xi[s]
        k = s + AR_ORDER
        j = s + MA_ORDER
        r[k] = (phi0 + phi[0] * r[k - 1] + phi[1] * r[k - 2] + phi[2] * r[k - 3]
                + a_s + theta[0] * a[j - 1] + theta[1] * a[j - 2] + theta[2] * a[j - 3])
        a[j] = a_s
        a_prev = a_s
    return r[AR_ORDER + burn:]
