"""Oriented bounding boxes manipulated by the shape grammar.

World space is y-up: a ground point (x, y) maps to (x, 0, y) in 3D.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UP = np.array([0.0, 1.0, 0.0])
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def to3(p2) -> np.ndarray:
    return np.array([p2[0], 0.0, p2[1]], dtype=float)


def to2(p3) -> tuple[float, float]:
    return (float(p3[0]), float(p3[2]))


@dataclass(frozen=True)
class Scope:
    origin: np.ndarray  # (3,)
    axes: np.ndarray    # (3, 3), rows are the local x, y, z axes
    size: np.ndarray    # (3,)

    def check(self, tol: float = 1e-9) -> None:
        g = self.axes @ self.axes.T
        if not np.allclose(g, np.eye(3), atol=tol):
            raise ValueError("scope axes are not orthonormal")
        if np.linalg.det(self.axes) < 0:
            raise ValueError("scope axes are left-handed")
        if np.any(self.size < -tol):
            raise ValueError("negative scope size")

    def with_size(self, axis: int, extent: float) -> "Scope":
        s = self.size.copy()
        s[axis] = extent
        return Scope(self.origin, self.axes, s)

    def moved(self, local_offset) -> "Scope":
        return Scope(self.origin + np.asarray(local_offset, float) @ self.axes, self.axes, self.size)

    def sub(self, axis: int, start: float, extent: float) -> "Scope":
        s = self.size.copy()
        s[axis] = extent
        return Scope(self.origin + start * self.axes[axis], self.axes, s)

    @property
    def is_volume(self) -> bool:
        return bool(np.all(self.size > 1e-12))

    def flat_axis(self) -> int | None:
        """Index of the zero-extent axis of a planar scope (z preferred)."""
        for k in (2, 1, 0):
            if self.size[k] <= 1e-12:
                return k
        return None

    def corners(self) -> np.ndarray:
        out = []
        for i in (0, 1):
            for j in (0, 1):
                for k in (0, 1):
                    out.append(self.origin + (np.array([i, j, k]) * self.size) @ self.axes)
        return np.array(out)

    def center(self) -> np.ndarray:
        return self.origin + (0.5 * self.size) @ self.axes

    def faces(self) -> list[tuple[str, "Scope"]]:
        """The six faces of a volume, each with its outward normal as local z.

        Labels are local to the box: ``-z``, ``+x``, ``+z``, ``-x``, ``+y``, ``-y``.
        """
        o = self.origin
        X, Y, Z = self.axes
        sx, sy, sz = self.size
        return [
            ("-z", Scope(o + sx * X, np.array([-X, Y, -Z]), np.array([sx, sy, 0.0]))),
            ("+x", Scope(o + sx * X + sz * Z, np.array([-Z, Y, X]), np.array([sz, sy, 0.0]))),
            ("+z", Scope(o + sz * Z, np.array([X, Y, Z]), np.array([sx, sy, 0.0]))),
            ("-x", Scope(o.copy(), np.array([Z, Y, -X]), np.array([sz, sy, 0.0]))),
            ("+y", Scope(o + sy * Y + sz * Z, np.array([X, -Z, Y]), np.array([sx, sz, 0.0]))),
            ("-y", Scope(o.copy(), np.array([X, Z, -Y]), np.array([sx, sz, 0.0]))),
        ]

    def footprint(self) -> np.ndarray:
        """Convex hull of the ground projection, counter-clockwise, as (n, 2)."""
        pts = self.corners()[:, [0, 2]]
        return convex_hull(pts)

    def to_dict(self) -> dict:
        return {
            "origin": [round(float(v), 9) for v in self.origin],
            "axes": [[round(float(v), 12) for v in row] for row in self.axes],
            "size": [round(float(v), 9) for v in self.size],
        }

    @staticmethod
    def from_dict(d: dict) -> "Scope":
        return Scope(np.array(d["origin"], float), np.array(d["axes"], float), np.array(d["size"], float))


def convex_hull(points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    pts = sorted({(round(float(x), 9), round(float(y), 9)) for x, y in points})
    if len(pts) <= 2:
        return np.array(pts, float)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= tol:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= tol:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1], float)


def polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def closest_on_segment(p, a, b) -> np.ndarray:
    p, a, b = (np.asarray(v, float) for v in (p, a, b))
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return a.copy()
    t = min(1.0, max(0.0, float((p - a) @ ab) / L2))
    return a + t * ab


def closest_on_polygon(p, poly: np.ndarray) -> np.ndarray:
    best, bd = None, np.inf
    n = len(poly)
    for i in range(n):
        q = closest_on_segment(p, poly[i], poly[(i + 1) % n])
        d = float(np.hypot(*(q - p)))
        if d < bd - 1e-12:
            best, bd = q, d
    return best
