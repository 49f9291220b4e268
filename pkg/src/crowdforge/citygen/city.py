"""The semantic city: buildings with typed entrances, zones and objects."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .. import __version__
from ..errors import GenerationError, InputError
from ..rulelang import ast
from .cga import LotResult, run_lot
from .layout import Layout, LayoutConfig, Lot, generate_layout
from .scope import Scope, closest_on_segment, convex_hull, polygon_area

DEFAULT_INTERACTIONS = {"bench": ("sit",)}


@dataclass(frozen=True)
class Entrance:
    type: str
    position: tuple[float, float]


@dataclass
class Building:
    id: int
    lot_id: int
    entrances: list
    floors: int
    footprint_area: float
    residential_capacity: int

    @property
    def types(self) -> list[str]:
        seen = []
        for e in self.entrances:
            if e.type not in seen:
                seen.append(e.type)
        return seen

    def has_type(self, kind: str) -> bool:
        return any(e.type == kind for e in self.entrances)

    def entrance_of(self, kind: Optional[str] = None) -> Entrance:
        if kind is not None:
            for e in self.entrances:
                if e.type == kind:
                    return e
        return self.entrances[0]

    def to_dict(self) -> dict:
        return {
            "id": self.id, "lotId": self.lot_id,
            "entrances": [{"type": e.type, "position": _pt(e.position)} for e in self.entrances],
            "floors": self.floors, "footprintArea": _r(self.footprint_area),
            "residentialCapacity": self.residential_capacity,
        }

    @staticmethod
    def from_dict(d: dict) -> "Building":
        return Building(int(d["id"]), int(d["lotId"]),
                        [Entrance(e["type"], tuple(e["position"])) for e in d["entrances"]],
                        int(d["floors"]), float(d["footprintArea"]), int(d["residentialCapacity"]))


@dataclass
class Zone:
    id: int
    type: str
    lot_id: int
    volume: Scope
    footprint: np.ndarray
    entry_points: list

    def to_dict(self) -> dict:
        return {"id": self.id, "type": self.type, "lotId": self.lot_id, "volume": self.volume.to_dict(),
                "footprint": [_pt(p) for p in self.footprint],
                "entryPoints": [_pt(p) for p in self.entry_points]}

    @staticmethod
    def from_dict(d: dict) -> "Zone":
        return Zone(int(d["id"]), d["type"], int(d["lotId"]), Scope.from_dict(d["volume"]),
                    np.array(d["footprint"], float), [tuple(p) for p in d["entryPoints"]])

    def contains(self, p, tol: float = 1e-6) -> bool:
        poly = self.footprint
        n = len(poly)
        for i in range(n):
            a, b = poly[i], poly[(i + 1) % n]
            if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -tol:
                return False
        return True


@dataclass
class CityObject:
    id: int
    type: str
    lot_id: int
    zone_id: Optional[int]
    position: tuple[float, float]
    interactions: tuple
    capacity: int = 1
    geometry: Optional[int] = None  # shape node id within its lot

    def to_dict(self) -> dict:
        return {"id": self.id, "type": self.type, "lotId": self.lot_id, "zoneId": self.zone_id,
                "position": _pt(self.position), "interactions": list(self.interactions),
                "capacity": self.capacity, "geometry": self.geometry}

    @staticmethod
    def from_dict(d: dict) -> "CityObject":
        return CityObject(int(d["id"]), d["type"], int(d["lotId"]),
                          None if d.get("zoneId") is None else int(d["zoneId"]),
                          tuple(d["position"]), tuple(d.get("interactions", ("use",))),
                          int(d.get("capacity", 1)), d.get("geometry"))


def _r(v: float) -> float:
    v = round(float(v), 6)
    return 0.0 if v == 0 else v


def _pt(p) -> list:
    return [_r(p[0]), _r(p[1])]


@dataclass
class SemanticCity:
    layout: LayoutConfig
    lots: list
    streets: list
    buildings: list
    zones: list
    objects: list
    seed: int
    meta: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    lot_results: Optional[list] = field(default=None, repr=False)

    def __post_init__(self):
        self._obj_tree = None

    # -- lookup ------------------------------------------------------------------
    def buildings_of_type(self, kind: str) -> list[Building]:
        return [b for b in self.buildings if b.has_type(kind)]

    def zones_of_type(self, kind: str) -> list[Zone]:
        return [z for z in self.zones if z.type == kind]

    @property
    def extent(self) -> tuple[float, float]:
        return self.layout.extent

    def _tree(self):
        if self._obj_tree is None and self.objects:
            self._obj_tree = cKDTree(np.array([o.position for o in self.objects], float))
        return self._obj_tree

    def objects_near(self, kind: str, point, radius: Optional[float]) -> list[CityObject]:
        """Objects of ``kind`` within Euclidean ``radius`` of ``point`` (all if radius is None), by id."""
        if radius is None:
            return [o for o in self.objects if o.type == kind]
        tree = self._tree()
        if tree is None:
            return []
        idx = tree.query_ball_point(np.asarray(point, float), float(radius) + 1e-9)
        return sorted((self.objects[i] for i in idx if self.objects[i].type == kind), key=lambda o: o.id)

    # -- validation ------------------------------------------------------------------
    def validate(self) -> None:
        problems = []
        lots = {lot.id: lot for lot in self.lots}
        sw = self.layout.streetWidth
        for b in self.buildings:
            lot = lots[b.lot_id]
            if not b.entrances:
                problems.append(f"lot {lot.id}: building {b.id} has no entrance")
            for e in b.entrances:
                if not _on_rect_boundary(e.position, lot.rect):
                    problems.append(f"lot {lot.id}: {e.type} entrance at {_pt(e.position)} is not on the lot boundary")
                elif _street_distance(e.position, self.streets) > sw + 1e-6:
                    problems.append(f"lot {lot.id}: {e.type} entrance at {_pt(e.position)} is farther than "
                                    f"{sw:g} m from any street")
            if (b.residential_capacity > 0) != b.has_type("house"):
                problems.append(f"lot {lot.id}: capacity {b.residential_capacity} inconsistent with entrances")
        for z in self.zones:
            if not z.entry_points:
                problems.append(f"lot {z.lot_id}: zone {z.id} has no entry point")
        for o in self.objects:
            if o.capacity < 1:
                problems.append(f"object {o.id} has capacity {o.capacity}")
        if problems:
            raise GenerationError("city validation failed:\n  " + "\n  ".join(problems))

    # -- serialization -------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "seed": self.seed,
            "layout": self.layout.to_dict(),
            "lots": [lot.to_dict() for lot in self.lots],
            "streets": [[_r(v) for v in s] for s in self.streets],
            "buildings": [b.to_dict() for b in self.buildings],
            "zones": [z.to_dict() for z in self.zones],
            "objects": [o.to_dict() for o in self.objects],
            "diagnostics": list(self.diagnostics),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @staticmethod
    def from_dict(d: dict) -> "SemanticCity":
        try:
            city = SemanticCity(
                LayoutConfig.from_dict(d["layout"]),
                [Lot.from_dict(x) for x in d["lots"]],
                [tuple(float(v) for v in s) for s in d["streets"]],
                [Building.from_dict(x) for x in d["buildings"]],
                [Zone.from_dict(x) for x in d["zones"]],
                [CityObject.from_dict(x) for x in d["objects"]],
                int(d.get("seed", 0)), d.get("meta", {}), list(d.get("diagnostics", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed city document: {exc!r}") from None
        for kind in ("buildings", "zones", "objects"):
            ids = [e.id for e in getattr(city, kind)]
            if ids != list(range(len(ids))):
                raise InputError(f"city {kind} ids must be dense and ordered 0..n-1")
        return city

    @staticmethod
    def load(path: str) -> "SemanticCity":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read city {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})") from None
        return SemanticCity.from_dict(d)


def _on_rect_boundary(p, rect, tol: float = 1e-6) -> bool:
    x, y = p
    x0, y0, x1, y1 = rect
    inside = x0 - tol <= x <= x1 + tol and y0 - tol <= y <= y1 + tol
    on_edge = min(abs(x - x0), abs(x - x1), abs(y - y0), abs(y - y1)) <= tol
    return inside and on_edge


def _street_distance(p, streets) -> float:
    best = np.inf
    for s in streets:
        q = closest_on_segment(p, s[:2], s[2:])
        best = min(best, float(np.hypot(q[0] - p[0], q[1] - p[1])))
    return best


def finalize_city(layout: Layout, results: list[LotResult], seed: int,
                  meta: Optional[dict] = None) -> SemanticCity:
    """Assign dense ids, derive building records and validate the result."""
    cfg = layout.config
    buildings: list[Building] = []
    zones: list[Zone] = []
    objects: list[CityObject] = []
    diagnostics: list[str] = []
    for res in sorted(results, key=lambda r: r.lot_id):
        diagnostics.extend(res.warnings)
        if res.error:
            diagnostics.append(f"lot {res.lot_id}: aborted: {res.error}")
            continue
        zone_ids = {}
        for k, z in enumerate(res.zones):
            zone_ids[k] = len(zones)
            zones.append(Zone(len(zones), z["type"], res.lot_id, z["volume"], z["footprint"],
                              list(z["entryPoints"])))
        for o in res.objects:
            objects.append(CityObject(
                len(objects), o["type"], res.lot_id,
                zone_ids.get(o["zone"]) if o["zone"] is not None else None,
                o["position"], DEFAULT_INTERACTIONS.get(o["type"], ("use",)), 1, o["node"]))
        if not res.entrances:
            continue
        solid = [n for n in res.leaves(objects=False) if n.zone is None or n.scope.size[1] > 0]
        pts = [c for n in solid for c in n.scope.corners()]
        height = max((float(c[1]) for c in pts), default=0.0)
        floors = max(1, int(round(height / cfg.floorHeight)))
        if pts:
            hull = convex_hull(np.array(pts)[:, [0, 2]])
            area = polygon_area(hull)
        else:
            area = 0.0
        entrances = [Entrance(t, p) for t, p in res.entrances]
        cap = floors * cfg.apartmentsPerFloor if any(e.type == "house" for e in entrances) else 0
        buildings.append(Building(len(buildings), res.lot_id, entrances, floors, area, cap))
    city = SemanticCity(cfg, list(layout.lots), list(layout.streets), buildings, zones, objects,
                        int(seed), dict(meta or {}), diagnostics, results)
    city.validate()
    return city


def generate_city(rules: ast.RuleFile, config: LayoutConfig, seed: int,
                  start_rule: Optional[str] = None, meta: Optional[dict] = None) -> SemanticCity:
    layout = generate_layout(config)
    results = [run_lot(rules, layout, lot, seed, start_rule) for lot in layout.lots]
    m = {"tool": "crowdforge", "version": __version__, "seed": int(seed)}
    m.update(meta or {})
    return finalize_city(layout, results, seed, m)


def write_obj(city: SemanticCity, path: str) -> None:
    """Dump leaf geometry as a Wavefront OBJ mesh (one group per lot)."""
    if not city.lot_results:
        raise GenerationError("geometry is only available right after generation")
    lines = ["# crowdforge city mesh", f"# seed {city.seed}"]
    nv = 0
    for res in city.lot_results:
        if res.error:
            continue
        lines.append(f"g lot{res.lot_id}")
        for node in res.leaves():
            s = node.scope
            quads = [f for _, f in s.faces()] if s.is_volume else [s]
            for q in quads:
                o, (X, Y, Z), (sx, sy, sz) = q.origin, q.axes, q.size
                u, v = (X * sx, Y * sy) if sz <= 1e-12 else ((X * sx, Z * sz) if sy <= 1e-12 else (Y * sy, Z * sz))
                for c in (o, o + u, o + u + v, o + v):
                    lines.append(f"v {c[0]:.4f} {c[1]:.4f} {c[2]:.4f}")
                lines.append(f"f {nv + 1} {nv + 2} {nv + 3} {nv + 4}")
                nv += 4
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
