import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mmnoise import surfaces as sf
from mmnoise.errors import InsufficientDataError


def test_winsorize_examples():
    assert list(sf.winsorize([1, 2, 3], 0.5)) == [1, 2, 2]
    out = sf.winsorize(np.arange(1, 101), 0.99)
    assert out[-1] == 99 and list(out[:-1]) == list(range(1, 100))
    assert list(sf.winsorize([4.0] * 5)) == [4.0] * 5
    with pytest.raises(InsufficientDataError):
        sf.winsorize([])


values = st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=60)


@given(values, st.floats(0.01, 0.99))
def test_winsorize_idempotent_and_upper_only(v, q):
    once = sf.winsorize(v, q)
    assert np.array_equal(sf.winsorize(once, q), once)
    assert np.all(once <= np.asarray(v))
    assert once.min() == min(v)


def test_smoothing_examples():
    t_axis, m_axis = np.linspace(1, 60, 7), np.linspace(0.9, 1.1, 5)
    g = sf.smooth_surface([(10, 1.0, 0.3), (40, 0.95, 0.3), (20, 1.05, 0.3)], t_axis, m_axis,
                          (20.0, 0.1))
    assert np.all(g.values == 0.3)
    g = sf.smooth_surface([(20, 1.0, 0.7)], t_axis, m_axis, (30.0, 0.1))
    assert np.all(g.values == 0.7)
    g = sf.smooth_surface([(0, 0, 1.0), (2, 2, 3.0)], [1.0], [1.0], (1.0, 1.0))
    assert g.values[0, 0] == pytest.approx(2.0, rel=1e-15)


def test_far_cells_are_missing():
    g = sf.smooth_surface([(0, 0, 1.0)], [0.0, 100.0], [0.0], (1.0, 1.0))
    assert g.values[0, 0] == 1.0 and np.isnan(g.values[1, 0])
    assert g.missing.tolist() == [[False], [True]]


pts = st.lists(st.tuples(st.floats(1, 100), st.floats(0.8, 1.2), st.floats(-1, 1)),
               min_size=1, max_size=30)


@given(pts, st.floats(-10, 10))
def test_shift_equivariance_and_bounds(points, c):
    t_axis, m_axis = np.linspace(1, 100, 6), np.linspace(0.8, 1.2, 6)
    bw = (10.0, 0.05)
    g = sf.smooth_surface(points, t_axis, m_axis, bw)
    shifted = [(t, m, v + c) for t, m, v in points]
    h = sf.smooth_surface(shifted, t_axis, m_axis, bw)
    ok = ~g.missing
    np.testing.assert_allclose(h.values[ok], g.values[ok] + c, atol=1e-9)
    v = np.array([p[2] for p in points])
    assert np.all(g.values[ok] >= v.min()) and np.all(g.values[ok] <= v.max())


def test_export_row_count_and_round_trip(tmp_path):
    g = sf.SurfaceGrid(np.array([1.0, 2.0]), np.array([0.9, 1.1]),
                       np.array([[0.1, np.nan], [1 / 3, 2.0]]), (0.5, 0.02))
    sidecar = sf.export_grid(g, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "T,M,value" and len(lines) == 5
    assert lines[2].endswith(",")
    meta = json.loads(sidecar.read_text())
    assert set(meta) == {"t_axis", "m_axis", "bandwidth_t", "bandwidth_m", "missing"}
    assert meta["missing"] == [[False, True], [False, False]]
    back = sf.import_grid(tmp_path / "g.csv")
    assert np.array_equal(back.values, g.values, equal_nan=True)
    assert np.array_equal(back.t_axis, g.t_axis) and back.bandwidth == g.bandwidth


def test_bad_bandwidth():
    with pytest.raises(ValueError):
        sf.smooth_surface([(1, 1, 1)], [1.0], [1.0], (0.0, 1.0))
