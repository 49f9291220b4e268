import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdforge import kernels
from crowdforge.kernels import (accumulate_heatmap, accumulate_heatmap_numpy, pack_polylines, positions_along,
                                positions_along_numpy)

pytestmark = pytest.mark.skipif(kernels.numba is None, reason="numba not installed")


def walk_oracle(poly, d):
    """Straightforward segment walk: the point at arclength d, clamped to the ends."""
    poly = np.asarray(poly, float)
    if len(poly) == 1:
        return poly[0]
    d = max(d, 0.0)
    for a, b in zip(poly[:-1], poly[1:]):
        L = float(np.hypot(*(b - a)))
        if d <= L and L > 0:
            return a + (b - a) * (d / L)
        d -= L
    return poly[-1]


coord = st.floats(-100, 100, allow_nan=False)
polyline = st.lists(st.tuples(coord, coord), min_size=1, max_size=6)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(polyline, st.floats(-0.2, 1.2)), min_size=1, max_size=8))
def test_positions_along_both_routes_match_oracle(cases):
    polys = [np.array(p) for p, _ in cases]
    points, cum, starts, counts = pack_polylines(polys)
    dist = np.array([f * cum[s + c - 1] for (_, f), s, c in zip(cases, starts, counts)])
    expected = np.array([walk_oracle(p, d) for p, d in zip(polys, dist)])
    fast = kernels._positions_along_nb(points, cum, starts, counts, dist)
    slow = positions_along_numpy(points, cum, starts, counts, dist)
    assert np.allclose(fast, expected, atol=1e-7)
    assert np.allclose(slow, expected, atol=1e-7)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(coord, coord), max_size=60), st.floats(0.5, 10))
def test_heatmap_both_routes_match_histogram(points, cell):
    xy = np.array(points, float).reshape(-1, 2)
    h, w, x0, y0 = 12, 15, -20.0, -30.0
    edges_x = x0 + cell * np.arange(w + 1)
    edges_y = y0 + cell * np.arange(h + 1)
    cx = np.floor((xy[:, 0] - x0) / cell)
    cy = np.floor((xy[:, 1] - y0) / cell)
    ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    # histogram2d treats the last edge as closed; count with explicit cell indices instead
    expected = np.zeros((h, w), np.int64)
    for i, j in zip(cy[ok].astype(int), cx[ok].astype(int)):
        expected[i, j] += 1
    inner = ok & (xy[:, 0] < edges_x[-1]) & (xy[:, 1] < edges_y[-1])
    hist, _, _ = np.histogram2d(xy[inner, 1], xy[inner, 0], bins=[edges_y, edges_x])
    assert (hist.astype(np.int64) == expected).all()
    a = np.zeros((h, w), np.int64)
    b = np.zeros((h, w), np.int64)
    n_fast = int(kernels._accumulate_heatmap_nb(a, xy[:, 0].copy(), xy[:, 1].copy(), x0, y0, cell))
    n_slow = accumulate_heatmap_numpy(b, xy[:, 0], xy[:, 1], x0, y0, cell)
    assert (a == expected).all() and (b == expected).all()
    assert n_fast == n_slow == int(ok.sum())


def test_env_flag_selects_route(monkeypatch):
    monkeypatch.setenv("CROWDFORGE_NUMBA", "0")
    assert not kernels.use_numba()
    monkeypatch.setenv("CROWDFORGE_NUMBA", "1")
    assert kernels.use_numba()
    monkeypatch.delenv("CROWDFORGE_NUMBA")
    assert kernels.use_numba()


@pytest.mark.parametrize("flag", ["0", "1"])
def test_dispatchers_agree_under_flag(monkeypatch, flag):
    monkeypatch.setenv("CROWDFORGE_NUMBA", flag)
    polys = [np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 10.0]]), np.array([[1.0, 1.0]])]
    points, cum, starts, counts = pack_polylines(polys)
    out = positions_along(points, cum, starts, counts, np.array([5.0, 2.0]))
    assert np.allclose(out, [[3.0, 4.0], [1.0, 1.0]])
    grid = np.zeros((2, 2), np.int64)
    assert accumulate_heatmap(grid, [0.5, 1.5, 9.0], [0.5, 0.5, 0.0], 0.0, 0.0, 1.0) == 2
    assert grid.tolist() == [[1, 1], [0, 0]]


def test_pack_empty():
    points, cum, starts, counts = pack_polylines([])
    assert positions_along(points, cum, starts, counts, np.zeros(0)).shape == (0, 2)
