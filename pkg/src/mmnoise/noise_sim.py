"""Monte Carlo simulation of spot dynamics with a Tanaka-type noise term.

The noise enters through ``dH = sgn(B) dB``, where ``B`` is the same Brownian
motion that drives the spot. Two readings of the noise coefficient are
supported:

``"absorbed"`` (default)
    The sign of ``B`` is folded into the coefficient, ``eps_t = eps*sgn(B_t)``,
    so the increment is ``eps*sgn(B)**2*dB``. ``sgn(B)**2`` equals 1 off the
    zero set of ``B``, which has Lebesgue measure zero, so the scheme uses 1
    throughout; evaluating it at the grid point ``B_0 = 0`` would silently drop
    the noise from the first step. The total volatility is then
    ``sigma + eps`` and risk-neutral prices agree with the closed form.
``"literal"``
    Constant ``eps`` multiplying ``sgn(B)*dB``; the instantaneous volatility
    switches between ``sigma + eps`` and ``sigma - eps`` with the sign of ``B``.

Paths are generated in fixed blocks of antithetic pairs. Each block draws
from its own Philox counter stream keyed by ``(seed, block index)``, so the
numbers a path sees depend only on the seed and its index, and any worker
count reproduces the serial result bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

PAIRS_PER_BLOCK = 4096
FLOOR_FRACTION = 1e-12
MODES = ("real-world", "risk-neutral")
NOISE_READINGS = ("absorbed", "literal")


@dataclass(frozen=True)
class PathConfig:
    spot0: float
    mu: float
    sigma: float
    epsilon: float
    horizon_days: float
    steps: int
    seed: int = 0
    mode: str = "real-world"
    rate: float = 0.0
    noise: str = "absorbed"

    def __post_init__(self):
        if not self.spot0 > 0:
            raise ValueError("spot0 must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.horizon_days > 0:
            raise ValueError("horizon_days must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.noise not in NOISE_READINGS:
            raise ValueError(f"noise must be one of {NOISE_READINGS}")

    @property
    def dt(self) -> float:
        return self.horizon_days / self.steps

    @property
    def drift(self) -> float:
        return self.rate if self.mode == "risk-neutral" else self.mu


class PathResult(NamedTuple):
    times: np.ndarray
    spots: np.ndarray
    floored: bool


class MCEstimate(NamedTuple):
    price: float
    standard_error: float
    n_paths: int
    n_floored: int


def _generator(seed: int, block: int) -> np.random.Generator:
    key = seed & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, block]))


def block_normals(seed: int, block: int, n_rows: int, steps: int) -> np.ndarray:
    """Standard normals for one block, shape ``(n_rows, steps)``."""
    return _generator(seed, block).standard_normal((n_rows, steps))


def _blocks(n_rows):
    full, rem = divmod(n_rows, PAIRS_PER_BLOCK)
    sizes = [PAIRS_PER_BLOCK] * full + ([rem] if rem else [])
    return list(enumerate(sizes))


def sgn(x):
    """Sign with ``sgn(0) = 0``."""
    return np.sign(x)


def h_from_increments(dB) -> np.ndarray:
    """``H_{k+1} = H_k + sgn(B_k) dB_k`` with ``B_0 = H_0 = 0``.

    ``dB`` has the step axis last; the result has one more entry on that axis.
    """
    dB = np.asarray(dB, dtype=float)
    B = np.cumsum(dB, axis=-1)
    B_prev = np.concatenate((np.zeros(dB.shape[:-1] + (1,)), B[..., :-1]), axis=-1)
    dH = sgn(B_prev) * dB
    return np.concatenate((np.zeros(dB.shape[:-1] + (1,)), np.cumsum(dH, axis=-1)), axis=-1)


def simulate_H(horizon: float, steps: int, seed: int = 0, n_paths: int = 1) -> np.ndarray:
    """Simulate ``H`` on ``steps`` equal steps; shape ``(n_paths, steps + 1)``."""
    sdt = math.sqrt(horizon / steps)
    out = []
    for block, size in _blocks(n_paths):
        out.append(h_from_increments(block_normals(seed, block, size, steps) * sdt))
    return np.concatenate(out, axis=0)


def _euler_block(cfg: PathConfig, dB: np.ndarray, keep_path=False):
    n, steps = dB.shape
    B_prev = np.zeros(n)
    S = np.full(n, float(cfg.spot0))
    floored = np.zeros(n, dtype=bool)
    floor = FLOOR_FRACTION * cfg.spot0
    drift = cfg.drift * cfg.dt
    path = np.empty((n, steps + 1)) if keep_path else None
    if keep_path:
        path[:, 0] = S
    for k in range(steps):
        inc = dB[:, k]
        noise_coef = 1.0 if cfg.noise == "absorbed" else sgn(B_prev)
        S *= 1.0 + drift + cfg.sigma * inc + cfg.epsilon * noise_coef * inc
        bad = S <= 0
        if bad.any():
            S[bad] = floor
            floored |= bad
        B_prev += inc
        if keep_path:
            path[:, k + 1] = S
    return (path if keep_path else S), floored


def simulate_path(config: PathConfig, path_index: int = 0) -> PathResult:
    """One Euler path of the arithmetic SDE; deterministic in (seed, path_index)."""
    block, offset = divmod(path_index // 2, PAIRS_PER_BLOCK)
    n_rows = min(PAIRS_PER_BLOCK, offset + 1)
    z = block_normals(config.seed, block, n_rows, config.steps)[offset]
    if path_index % 2:
        z = -z
    dB = z[None, :] * math.sqrt(config.dt)
    spots, floored = _euler_block(config, dB, keep_path=True)
    times = np.linspace(0.0, config.horizon_days, config.steps + 1)
    return PathResult(times, spots[0], bool(floored[0]))


def _terminal_block(config, block, n_pairs, antithetic):
    z = block_normals(config.seed, block, n_pairs, config.steps)
    if antithetic:
        z = np.concatenate((z, -z), axis=0)
    return _euler_block(config, z * math.sqrt(config.dt))


def simulate_terminal(config: PathConfig, n_paths: int, antithetic: bool = True,
                      workers: int = 1):
    """Terminal spots for ``n_paths`` paths.

    With ``antithetic=True`` the result has shape ``(n_paths // 2, 2)``, row j
    holding the pair driven by ``+Z_j`` and ``-Z_j``; otherwise ``(n_paths,)``.
    Returns ``(terminal, floored)`` with matching shapes.
    """
    rows = n_paths // 2 if antithetic else n_paths
    if antithetic and n_paths % 2:
        raise ValueError("antithetic sampling needs an even n_paths")
    jobs = _blocks(rows)

    def run(job):
        block, size = job
        return _terminal_block(config, block, size, antithetic)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    if antithetic:
        term = np.concatenate([np.stack(np.split(s, 2), axis=1) for s, _ in parts])
        flags = np.concatenate([np.stack(np.split(f, 2), axis=1) for _, f in parts])
    else:
        term = np.concatenate([s for s, _ in parts])
        flags = np.concatenate([f for _, f in parts])
    return term, flags


def mc_call_price(config: PathConfig, strike: float, rate: float | None = None,
                  n_paths: int = 100_000, antithetic: bool = True, workers: int = 1) -> MCEstimate:
    """Discounted Monte Carlo estimate of ``E[max(S_T - K, 0)]`` under the risk-neutral drift.

    The standard error is computed over antithetic pair averages when
    ``antithetic`` is set.
    """
    if n_paths < 1000:
        raise ValueError("n_paths must be at least 1000")
    if rate is None:
        rate = config.rate
    config = replace(config, mode="risk-neutral", rate=rate)
    term, flags = simulate_terminal(config, n_paths, antithetic=antithetic, workers=workers)
    disc = math.exp(-rate * config.horizon_days)
    payoff = np.maximum(term - strike, 0.0) * disc
    samples = payoff.mean(axis=1) if antithetic else payoff
    m = samples.size
    mean = math.fsum(samples) / m
    var = math.fsum((samples - mean) ** 2) / (m - 1)
    return MCEstimate(price=mean, standard_error=math.sqrt(var / m),
                      n_paths=int(term.size), n_floored=int(flags.sum()))
