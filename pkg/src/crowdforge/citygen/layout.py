"""Rectangular block/lot layout on an orthogonal street grid."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from ..errors import InputError
from .scope import Scope


@dataclass
class LayoutConfig:
    blocksX: int = 4
    blocksY: int = 4
    lotsPerBlockX: int = 2
    lotsPerBlockY: int = 2
    lotWidth: float = 20.0
    lotDepth: float = 20.0
    streetWidth: float = 10.0
    aspect: float = 1.0  # multiplies lotDepth
    seed: int = 0
    apartmentsPerFloor: int = 2
    floorHeight: float = 3.0
    zoneHeight: float = 3.0
    maxDepth: int = 64

    def validate(self) -> "LayoutConfig":
        for name in ("blocksX", "blocksY", "lotsPerBlockX", "lotsPerBlockY", "apartmentsPerFloor", "maxDepth"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"layout: {name} must be >= 1")
        for name in ("lotWidth", "lotDepth", "streetWidth", "aspect", "floorHeight", "zoneHeight"):
            if not float(getattr(self, name)) > 0:
                raise InputError(f"layout: {name} must be > 0")
        if self.lotsPerBlockX > 2 and self.lotsPerBlockY > 2:
            raise InputError("layout: with more than 2 lots per block in both directions some lots "
                             "would not touch a street")
        return self

    @property
    def depth(self) -> float:
        return self.lotDepth * self.aspect

    @property
    def pitch(self) -> tuple[float, float]:
        return (self.lotsPerBlockX * self.lotWidth + self.streetWidth,
                self.lotsPerBlockY * self.depth + self.streetWidth)

    @property
    def extent(self) -> tuple[float, float]:
        px, py = self.pitch
        return (self.streetWidth + self.blocksX * px, self.streetWidth + self.blocksY * py)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "LayoutConfig":
        known = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in d.items():
            if k not in known:
                raise InputError(f"layout: unknown key {k!r}")
            kw[k] = int(v) if known[k] in ("int", int) else float(v)
        return cls(**kw).validate()


def read_layout(path: str, overrides: Optional[dict] = None) -> LayoutConfig:
    """Read a ``key = value`` layout file; ``#`` starts a comment."""
    d: dict = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise InputError(f"{path}:{n}: expected key = value")
                d[key.strip()] = value.strip()
    except OSError as exc:
        raise InputError(f"cannot read layout {path}: {exc.strerror}") from None
    d.update(overrides or {})
    try:
        return LayoutConfig.from_dict(d)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


# edge name -> outward normal
EDGE_NORMALS = {"south": (0.0, -1.0), "north": (0.0, 1.0), "west": (-1.0, 0.0), "east": (1.0, 0.0)}
_EDGE_PREFERENCE = ("south", "north", "west", "east")


@dataclass(frozen=True)
class Lot:
    id: int
    block: tuple[int, int]
    index: tuple[int, int]
    rect: tuple[float, float, float, float]  # x0, y0, x1, y1
    street_edges: tuple[str, ...]
    front: str

    @property
    def width(self) -> float:
        return self.rect[2] - self.rect[0]

    @property
    def height(self) -> float:
        return self.rect[3] - self.rect[1]

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.rect
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))

    def edge(self, name: str) -> tuple[tuple[float, float], tuple[float, float]]:
        x0, y0, x1, y1 = self.rect
        return {
            "south": ((x0, y0), (x1, y0)),
            "north": ((x0, y1), (x1, y1)),
            "west": ((x0, y0), (x0, y1)),
            "east": ((x1, y0), (x1, y1)),
        }[name]

    @property
    def street_dir(self) -> np.ndarray:
        return np.array(EDGE_NORMALS[self.front])

    def scope(self) -> Scope:
        """Planar lot scope: x along the front edge, z pointing away from the street."""
        nx, ny = -self.street_dir
        a = np.array([ny, -nx])
        n = np.array([nx, ny])
        x0, y0, x1, y1 = self.rect
        corners = [np.array(c) for c in ((x0, y0), (x1, y0), (x0, y1), (x1, y1))]
        c = np.array(self.center)
        origin = next(p for p in corners if (p - c) @ a < 0 and (p - c) @ n < 0)
        W = abs(float((np.array([x1 - x0, y1 - y0])) @ np.abs(a)))
        D = abs(float((np.array([x1 - x0, y1 - y0])) @ np.abs(n)))
        axes = np.array([[a[0], 0.0, a[1]], [0.0, 1.0, 0.0], [n[0], 0.0, n[1]]])
        return Scope(np.array([origin[0], 0.0, origin[1]]), axes, np.array([W, 0.0, D]))

    def to_dict(self) -> dict:
        return {"id": self.id, "block": list(self.block), "index": list(self.index),
                "rect": list(self.rect), "streetEdges": list(self.street_edges), "front": self.front}

    @staticmethod
    def from_dict(d: dict) -> "Lot":
        return Lot(int(d["id"]), tuple(d["block"]), tuple(d["index"]), tuple(float(v) for v in d["rect"]),
                   tuple(d["streetEdges"]), d["front"])


@dataclass(frozen=True)
class Layout:
    config: LayoutConfig
    lots: tuple[Lot, ...]
    streets: tuple[tuple[float, float, float, float], ...]  # centerline segments

    @property
    def extent(self) -> tuple[float, float]:
        return self.config.extent


def generate_layout(config: LayoutConfig, rng: Optional[np.random.Generator] = None) -> Layout:
    """Blocks on a regular grid separated by streets, each split into lots.

    The grid is fully determined by the config; ``rng`` is accepted for
    interface symmetry with the other generators and is not consumed.
    """
    config.validate()
    sw = config.streetWidth
    px, py = config.pitch
    W, H = config.extent
    lots: list[Lot] = []
    nx, ny = config.lotsPerBlockX, config.lotsPerBlockY
    for by in range(config.blocksY):
        for bx in range(config.blocksX):
            bx0 = sw + bx * px
            by0 = sw + by * py
            for j in range(ny):
                for i in range(nx):
                    x0 = bx0 + i * config.lotWidth
                    y0 = by0 + j * config.depth
                    rect = (x0, y0, x0 + config.lotWidth, y0 + config.depth)
                    edges = []
                    if j == 0:
                        edges.append("south")
                    if j == ny - 1:
                        edges.append("north")
                    if i == 0:
                        edges.append("west")
                    if i == nx - 1:
                        edges.append("east")
                    edges.sort(key=_EDGE_PREFERENCE.index)
                    front = _pick_front(edges, config.lotWidth, config.depth)
                    lots.append(Lot(len(lots), (bx, by), (i, j), rect, tuple(edges), front))
    streets = []
    for k in range(config.blocksY + 1):
        y = sw / 2 + k * py
        streets.append((sw / 2, y, W - sw / 2, y))
    for k in range(config.blocksX + 1):
        x = sw / 2 + k * px
        streets.append((x, sw / 2, x, H - sw / 2))
    return Layout(config, tuple(lots), tuple(streets))


def _pick_front(edges: list[str], width: float, depth: float) -> str:
    # corner lots face their longer street edge; ties keep the preference order
    def length(e: str) -> float:
        return width if e in ("south", "north") else depth
    best = max(length(e) for e in edges)
    return next(e for e in edges if length(e) == best)
