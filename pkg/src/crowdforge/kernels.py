"""Hot numeric kernels with a numba and a pure-numpy implementation.

``CROWDFORGE_NUMBA=0`` forces the numpy path; any other value (or unset)
uses numba when it can be imported. Both paths return identical results.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def numba_requested() -> bool:
    return os.environ.get("CROWDFORGE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


# -- numpy implementations -------------------------------------------------------------------


def positions_along_numpy(points: np.ndarray, cum: np.ndarray, starts: np.ndarray, counts: np.ndarray,
                          dist: np.ndarray) -> np.ndarray:
    """Point at arclength ``dist[a]`` on polyline ``a`` for every agent.

    Polylines are packed: polyline ``a`` occupies rows ``starts[a]:starts[a]+counts[a]``
    of ``points`` (n, 2) and ``cum`` (cumulative arclength, 0 at each start).
    Distances are clamped to [0, length].
    """
    n = len(starts)
    out = np.empty((n, 2))
    if n == 0:
        return out
    starts = starts.astype(np.int64)
    counts = counts.astype(np.int64)
    last = starts + counts - 1
    d = np.clip(dist, 0.0, cum[last])
    single = counts <= 1
    # shift every polyline's arclengths past the previous one so a single sorted search works
    lengths = cum[last]
    base = np.concatenate([[0.0], np.cumsum(lengths + 1.0)[:-1]])
    row_base = np.repeat(base, counts)
    i = np.searchsorted(cum + row_base, d + base, side="right") - 1
    i = np.minimum(np.maximum(i, starts), np.maximum(last - 1, starts))
    j = np.where(single, i, i + 1)
    seg = cum[j] - cum[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(seg > 0, (d - cum[i]) / np.where(seg > 0, seg, 1.0), 0.0)
    out[:] = points[i] + f[:, None] * (points[j] - points[i])
    return out


def accumulate_heatmap_numpy(counts: np.ndarray, xs: np.ndarray, ys: np.ndarray, x0: float, y0: float,
                             cell: float) -> int:
    """Add one to the cell holding each point; returns how many points landed inside."""
    h, w = counts.shape
    cx = np.floor((xs - x0) / cell).astype(np.int64)
    cy = np.floor((ys - y0) / cell).astype(np.int64)
    ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    np.add.at(counts, (cy[ok], cx[ok]), 1)
    return int(ok.sum())


# -- numba implementations -------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _positions_along_nb(points, cum, starts, counts, dist):
        n = starts.shape[0]
        out = np.empty((n, 2))
        for a in range(n):
            s = starts[a]
            c = counts[a]
            e = s + c - 1
            d = dist[a]
            if d < 0.0:
                d = 0.0
            if d > cum[e]:
                d = cum[e]
            if c <= 1:
                out[a, 0] = points[s, 0]
                out[a, 1] = points[s, 1]
                continue
            # binary search for the last row with cum <= d
            lo, hi = s, e
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if cum[mid] <= d:
                    lo = mid
                else:
                    hi = mid
            i = lo
            while i + 1 < e and cum[i + 1] <= d:
                i += 1
            seg = cum[i + 1] - cum[i]
            f = (d - cum[i]) / seg if seg > 0.0 else 0.0
            out[a, 0] = points[i, 0] + f * (points[i + 1, 0] - points[i, 0])
            out[a, 1] = points[i, 1] + f * (points[i + 1, 1] - points[i, 1])
        return out

    @numba.njit(cache=True)
    def _accumulate_heatmap_nb(counts, xs, ys, x0, y0, cell):
        h, w = counts.shape
        inside = 0
        for k in range(xs.shape[0]):
            cx = int(np.floor((xs[k] - x0) / cell))
            cy = int(np.floor((ys[k] - y0) / cell))
            if 0 <= cx < w and 0 <= cy < h:
                counts[cy, cx] += 1
                inside += 1
        return inside


def use_numba() -> bool:
    return numba is not None and numba_requested()


def positions_along(points, cum, starts, counts, dist) -> np.ndarray:
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    cum = np.ascontiguousarray(cum, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    if use_numba():
        return _positions_along_nb(points, cum, starts, counts, dist)
    return positions_along_numpy(points, cum, starts, counts, dist)


def accumulate_heatmap(counts: np.ndarray, xs, ys, x0: float, y0: float, cell: float) -> int:
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if use_numba():
        return int(_accumulate_heatmap_nb(counts, xs, ys, float(x0), float(y0), float(cell)))
    return accumulate_heatmap_numpy(counts, xs, ys, x0, y0, cell)


def pack_polylines(polylines: list) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Concatenate polylines into (points, cum, starts, counts) for :func:`positions_along`."""
    if not polylines:
        return np.zeros((0, 2)), np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64)
    counts = np.array([len(p) for p in polylines], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    points = np.concatenate([np.asarray(p, float).reshape(-1, 2) for p in polylines])
    cums = []
    for p in polylines:
        p = np.asarray(p, float).reshape(-1, 2)
        seg = np.hypot(*np.diff(p, axis=0).T) if len(p) > 1 else np.zeros(0)
        cums.append(np.concatenate([[0.0], np.cumsum(seg)]))
    return points, np.concatenate(cums), starts, counts
