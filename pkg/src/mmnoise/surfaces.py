"""Winsorizing, Gaussian-kernel smoothing and export of implied surfaces."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError

MIN_WEIGHT = 1e-12


@dataclass(frozen=True)
class SurfaceGrid:
    t_axis: np.ndarray
    m_axis: np.ndarray
    values: np.ndarray          # shape (len(t_axis), len(m_axis)); NaN where missing
    bandwidth: tuple[float, float]

    def __post_init__(self):
        shape = (len(self.t_axis), len(self.m_axis))
        if np.shape(self.values) != shape:
            raise ValueError(f"values shape {np.shape(self.values)} does not match axes {shape}")

    @property
    def missing(self) -> np.ndarray:
        return ~np.isfinite(self.values)


def lower_quantile(values, q: float) -> float:
    return float(np.quantile(np.asarray(values, dtype=float), q, method="lower"))


def winsorize(values, quantile: float = 0.99) -> np.ndarray:
    """Clip entries above the empirical ``quantile`` (lower interpolation).

    Only the upper tail is clipped; order is preserved.
    """
    if not 0 < quantile < 1:
        raise ValueError(f"quantile must lie in (0, 1), got {quantile}")
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InsufficientDataError("cannot winsorize an empty sequence")
    return np.minimum(v, lower_quantile(v, quantile))


def default_bandwidth(t, m, fraction: float = 0.1) -> tuple[float, float]:
    """Bandwidths as a fraction of each axis range (1.0 for a degenerate axis)."""
    def one(x):
        span = float(np.ptp(x)) if np.size(x) else 0.0
        return fraction * span if span > 0 else 1.0
    return one(t), one(m)


def smooth_surface(points, t_axis, m_axis, bandwidth=None) -> SurfaceGrid:
    """Nadaraya-Watson estimate on the ``t_axis x m_axis`` grid.

    Parameters
    ----------
    points : array-like, shape (n, 3)
        Rows of ``(T, M, value)``.
    t_axis, m_axis : array-like
        Ascending grid coordinates.
    bandwidth : (h_T, h_M), optional
        Kernel widths in axis units; defaults to 10% of each data range.

    Cells whose total kernel weight falls below 1e-12 are left as NaN.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise InsufficientDataError("need at least one point to smooth")
    t, m, v = pts.T
    if bandwidth is None:
        bandwidth = default_bandwidth(t, m)
    h_t, h_m = map(float, bandwidth)
    if not (h_t > 0 and h_m > 0):
        raise ValueError("bandwidths must be positive")
    t_axis = np.asarray(t_axis, dtype=float)
    m_axis = np.asarray(m_axis, dtype=float)

    kt = np.exp(-0.5 * ((t_axis[:, None] - t[None, :]) / h_t) ** 2)   # (nt, n)
    km = np.exp(-0.5 * ((m_axis[:, None] - m[None, :]) / h_m) ** 2)   # (nm, n)
    wsum = kt @ km.T
    wval = (kt * v[None, :]) @ km.T
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(wsum >= MIN_WEIGHT, wval / wsum, np.nan)
    # clamp roundoff back into the data range (the estimate is a convex combination)
    values = np.clip(values, v.min(), v.max())
    return SurfaceGrid(t_axis, m_axis, values, (h_t, h_m))


def regular_axes(t, m, n_t: int = 40, n_m: int = 40):
    return (np.linspace(np.min(t), np.max(t), n_t),
            np.linspace(np.min(m), np.max(m), n_m))


def export_grid(grid: SurfaceGrid, path) -> Path:
    """Write ``T,M,value`` long-format CSV plus a ``.json`` sidecar.

    Missing cells get an empty ``value`` field. Returns the sidecar path.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "M", "value"])
        for i, tv in enumerate(grid.t_axis):
            for j, mv in enumerate(grid.m_axis):
                val = grid.values[i, j]
                w.writerow([repr(float(tv)), repr(float(mv)),
                            repr(float(val)) if math.isfinite(val) else ""])
    sidecar = path.with_suffix(".json")
    meta = {
        "t_axis": [float(x) for x in grid.t_axis],
        "m_axis": [float(x) for x in grid.m_axis],
        "bandwidth_t": float(grid.bandwidth[0]),
        "bandwidth_m": float(grid.bandwidth[1]),
        "missing": grid.missing.tolist(),
    }
    sidecar.write_text(json.dumps(meta, indent=1))
    return sidecar


def import_grid(path) -> SurfaceGrid:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    t_axis = np.array(meta["t_axis"], dtype=float)
    m_axis = np.array(meta["m_axis"], dtype=float)
    values = np.full((t_axis.size, m_axis.size), np.nan)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != values.size:
        raise ValueError(f"expected {values.size} rows, found {len(rows)}")
    for k, row in enumerate(rows):
        if row["value"] != "":
            values[divmod(k, m_axis.size)] = float(row["value"])
    return SurfaceGrid(t_axis, m_axis, values, (meta["bandwidth_t"], meta["bandwidth_m"]))
