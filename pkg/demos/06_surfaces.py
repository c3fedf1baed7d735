"""Winsorize scattered implied values and smooth them onto a (T, M) grid."""
import tempfile
from pathlib import Path

import numpy as np

from mmnoise.surfaces import export_grid, regular_axes, smooth_surface, winsorize

rng = np.random.default_rng(0)
t = rng.integers(1, 120, 300).astype(float)
m = rng.uniform(0.85, 1.15, 300)
v = 0.002 + 0.01 * (m - 1) ** 2 + 0.0005 * rng.standard_normal(300)
v[:3] = 0.5                                        # a few wild quotes

v = winsorize(v, 0.99)
t_axis, m_axis = regular_axes(t, m, 12, 9)
grid = smooth_surface(np.column_stack((t, m, v)), t_axis, m_axis)
print("bandwidth:", grid.bandwidth, " missing cells:", int(grid.missing.sum()))
print(np.array2string(grid.values[::3, ::2], precision=4))

out = Path(tempfile.mkdtemp()) / "eps.grid.csv"
print("sidecar:", export_grid(grid, out))
