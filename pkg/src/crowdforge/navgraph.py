"""Walkable street graph and shortest-path queries.

Nodes sit on street centerlines (intersections plus the foot of every
connector) and on the attachment points themselves: entrances, zone entry
points and objects. Connectors run perpendicular from an attachment to its
nearest street; objects inside a zone link straight to the zone's nearest
entry point instead.
"""
from __future__ import annotations

import heapq
import json
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .citygen.city import SemanticCity
from .errors import GenerationError
from .rulelang.values import INVALID

log = logging.getLogger(__name__)

EPS = 1e-9
Key = tuple  # ("entrance", building, index) | ("zone", zone, index) | ("object", object)


@dataclass(frozen=True)
class Path:
    node_sequence: tuple
    polyline: np.ndarray  # (n, 2)
    total_length: float

    def __post_init__(self):
        seg = np.hypot(*np.diff(self.polyline, axis=0).T) if len(self.polyline) > 1 else np.zeros(0)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))

    @property
    def cumulative(self) -> np.ndarray:
        return self._cum

    @property
    def start(self) -> tuple:
        return tuple(self.polyline[0])

    @property
    def end(self) -> tuple:
        return tuple(self.polyline[-1])

    def position_at(self, d: float, warn: bool = True) -> tuple[float, float]:
        return position_at_distance(self, d, warn)


def path_length(path: Path) -> float:
    return path.total_length


def position_at_distance(path: Path, d: float, warn: bool = True) -> tuple[float, float]:
    L = path.total_length
    if d < 0 or d > L + 1e-9:
        if warn:
            log.warning("distance %.6g clamped to path length %.6g", d, L)
        d = min(max(d, 0.0), L)
    cum = path.cumulative
    pl = path.polyline
    if len(pl) == 1 or L == 0:
        return (float(pl[0][0]), float(pl[0][1]))
    i = int(np.searchsorted(cum, d, side="right")) - 1
    i = min(max(i, 0), len(pl) - 2)
    seg = cum[i + 1] - cum[i]
    f = 0.0 if seg <= 0 else (d - cum[i]) / seg
    p = pl[i] + f * (pl[i + 1] - pl[i])
    return (float(p[0]), float(p[1]))


class NavGraph:
    def __init__(self, positions: np.ndarray, edges: list[tuple[int, int, float]],
                 attachments: dict, cache_size: int = 4096):
        self.positions = np.asarray(positions, float)
        self.edges = list(edges)
        self.attachments = dict(attachments)
        n = len(self.positions)
        self.adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for a, b, w in self.edges:
            self.adj[a].append((b, w))
            self.adj[b].append((a, w))
        for lst in self.adj:
            lst.sort()
        self._cache: OrderedDict = OrderedDict()
        self._cache_size = cache_size
        self._edge_arr = np.array([[a, b] for a, b, _ in self.edges], dtype=np.int64).reshape(-1, 2)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    # -- single-source search -------------------------------------------------------
    def _sssp(self, src: int) -> tuple[np.ndarray, np.ndarray]:
        hit = self._cache.get(src)
        if hit is not None:
            self._cache.move_to_end(src)
            return hit
        n = self.n_nodes
        dist = np.full(n, np.inf)
        pred = np.full(n, -1, dtype=np.int64)
        dist[src] = 0.0
        done = np.zeros(n, dtype=bool)
        heap = [(0.0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v, w in self.adj[u]:
                nd = d + w
                dv = dist[v]
                if nd < dv - EPS:
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
                elif abs(nd - dv) <= EPS and not done[v] and u < pred[v]:
                    pred[v] = u
        dist.setflags(write=False)
        pred.setflags(write=False)
        self._cache[src] = (dist, pred)
        if len(self._cache) > self._cache_size:
            self._cache.popitem(last=False)
        return dist, pred

    def node_distance(self, a: int, b: int) -> float:
        return float(self._sssp(a)[0][b])

    def node_path(self, a: int, b: int) -> Optional[list[int]]:
        dist, pred = self._sssp(a)
        if not np.isfinite(dist[b]):
            return None
        seq = [b]
        while seq[-1] != a:
            seq.append(int(pred[seq[-1]]))
        return seq[::-1]

    # -- endpoints -----------------------------------------------------------------------
    def node_of(self, key: Key) -> int:
        try:
            return self.attachments[key]
        except KeyError:
            raise GenerationError(f"no navigation attachment for {key}") from None

    def nearest_edge(self, p) -> tuple[int, float, np.ndarray]:
        """Index of the edge closest to ``p``, the parameter along it and the foot point."""
        P = self.positions
        A = P[self._edge_arr[:, 0]]
        B = P[self._edge_arr[:, 1]]
        AB = B - A
        L2 = np.einsum("ij,ij->i", AB, AB)
        p = np.asarray(p, float)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(L2 > 0, np.einsum("ij,ij->i", p - A, AB) / L2, 0.0)
        t = np.clip(t, 0.0, 1.0)
        Q = A + t[:, None] * AB
        d = np.hypot(*(Q - p).T)
        i = int(np.argmin(d))
        return i, float(t[i]), Q[i]

    def _resolve(self, end) -> tuple[list, Optional[tuple]]:
        """Graph entry options for an endpoint: [(node, offset, lead-in points)]."""
        if isinstance(end, (int, np.integer)):
            return [(int(end), 0.0, [])], None
        if isinstance(end, tuple) and end and isinstance(end[0], str):
            return [(self.node_of(end), 0.0, [])], None
        p = np.asarray(end, float)
        i, t, q = self.nearest_edge(p)
        a, b, w = self.edges[i]
        off = float(np.hypot(*(q - p)))
        lead = [tuple(p)] + ([tuple(q)] if off > EPS else [])
        opts = [(a, off + t * w, lead), (b, off + (1 - t) * w, lead)]
        return opts, (i, t, q, off, tuple(p))

    def shortest_path(self, src, dst) -> Union[Path, type(INVALID)]:
        """Path between nodes, attachment keys or free 2D points."""
        s_opts, s_edge = self._resolve(src)
        t_opts, t_edge = self._resolve(dst)
        best = None
        for sn, so, slead in s_opts:
            dist, _ = self._sssp(sn)
            for tn, to, tlead in t_opts:
                total = so + float(dist[tn]) + to
                if best is None or total < best[0] - EPS:
                    best = (total, sn, slead, tn, tlead)
        direct = None
        if s_edge is not None and t_edge is not None and s_edge[0] == t_edge[0]:
            _, ts, qs, offs, ps = s_edge
            _, tt, qt, offt, pt = t_edge
            w = self.edges[s_edge[0]][2]
            total = offs + abs(ts - tt) * w + offt
            if best is None or total <= best[0] + EPS:
                pts = [ps] + ([tuple(qs)] if offs > EPS else [])
                pts += [tuple(qt)] if offt > EPS else []
                pts.append(pt)
                direct = (total, pts)
        if direct is not None:
            return Path((), _dedupe(direct[1]), _poly_length(_dedupe(direct[1])))
        if best is None or not np.isfinite(best[0]):
            return INVALID
        total, sn, slead, tn, tlead = best
        nodes = self.node_path(sn, tn)
        pts = list(slead) + [tuple(self.positions[k]) for k in nodes] + list(reversed(tlead))
        pl = _dedupe(pts)
        return Path(tuple(nodes), pl, _poly_length(pl))

    def distance(self, src, dst) -> float:
        p = self.shortest_path(src, dst)
        return INVALID if p is INVALID else p.total_length

    # -- entity helpers -------------------------------------------------------------------------
    def building_node(self, building_id: int, entrance: int = 0) -> int:
        return self.node_of(("entrance", building_id, entrance))

    def object_node(self, object_id: int) -> int:
        return self.node_of(("object", object_id))

    def building_distance(self, b1: int, b2: int) -> float:
        return self.node_distance(self.building_node(b1), self.building_node(b2))

    # -- serialization ---------------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "nodes": [[round(float(x), 6), round(float(y), 6)] for x, y in self.positions],
            "edges": [[a, b, round(w, 6)] for a, b, w in self.edges],
            "attachments": [[list(k), v] for k, v in sorted(self.attachments.items(), key=lambda kv: kv[1])],
        }

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def check_connected(self) -> None:
        if not self.attachments:
            return
        keys = sorted(self.attachments, key=lambda k: self.attachments[k])
        start = self.attachments[keys[0]]
        seen = np.zeros(self.n_nodes, dtype=bool)
        seen[start] = True
        stack = [start]
        while stack:
            u = stack.pop()
            for v, _ in self.adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        bad = [k for k in keys if not seen[self.attachments[k]]]
        if bad:
            raise GenerationError("navigation graph is disconnected; unreachable: " +
                                  ", ".join(_key_name(k) for k in bad))


def _key_name(k: Key) -> str:
    if k[0] == "entrance":
        return f"building {k[1]} entrance {k[2]}"
    if k[0] == "zone":
        return f"zone {k[1]} entry {k[2]}"
    return f"{k[0]} {k[1]}"


def _dedupe(pts: Sequence) -> np.ndarray:
    out = []
    for p in pts:
        p = (float(p[0]), float(p[1]))
        if not out or abs(out[-1][0] - p[0]) > EPS or abs(out[-1][1] - p[1]) > EPS:
            out.append(p)
    return np.array(out, float).reshape(-1, 2)


def _poly_length(pl: np.ndarray) -> float:
    if len(pl) < 2:
        return 0.0
    return float(np.sum(np.hypot(*np.diff(pl, axis=0).T)))


class _Builder:
    def __init__(self):
        self.pos: list[tuple[float, float]] = []
        self.index: dict = {}
        self.edges: dict = {}

    def node(self, p) -> int:
        key = (round(float(p[0]), 6), round(float(p[1]), 6))
        k = self.index.get(key)
        if k is None:
            k = len(self.pos)
            self.index[key] = k
            self.pos.append((float(p[0]), float(p[1])))
        return k

    def edge(self, a: int, b: int) -> None:
        if a == b:
            return
        key = (min(a, b), max(a, b))
        if key not in self.edges:
            pa, pb = self.pos[a], self.pos[b]
            self.edges[key] = float(np.hypot(pa[0] - pb[0], pa[1] - pb[1]))


def build_navgraph(city: SemanticCity, cache_size: int = 4096) -> NavGraph:
    """Street lattice plus perpendicular connectors for every attachment."""
    streets = [tuple(s) for s in city.streets]
    g = _Builder()
    # stops along each street, as arclength parameters
    stops: list[set] = [set() for _ in streets]
    for i, s in enumerate(streets):
        stops[i].update((0.0, _seg_len(s)))
        for j, o in enumerate(streets):
            if i != j:
                hit = _intersect(s, o)
                if hit is not None:
                    stops[i].add(round(hit, 9))

    attach_pts: list[tuple[Key, tuple]] = []
    for b in city.buildings:
        for k, e in enumerate(b.entrances):
            attach_pts.append((("entrance", b.id, k), tuple(e.position)))
    for z in city.zones:
        for k, p in enumerate(z.entry_points):
            attach_pts.append((("zone", z.id, k), tuple(p)))
    zone_objects = []
    for o in city.objects:
        if o.zone_id is not None:
            zone_objects.append(o)
        else:
            attach_pts.append((("object", o.id), tuple(o.position)))

    feet = []
    for key, p in attach_pts:
        i, t, q = _nearest_street(p, streets)
        L = _seg_len(streets[i])
        stops[i].add(round(t * L, 9))
        feet.append((key, p, i, t * L))

    street_nodes: list[dict] = []
    for i, s in enumerate(streets):
        ordered = sorted(stops[i])
        ids = {}
        L = _seg_len(s)
        for d in ordered:
            f = d / L if L > 0 else 0.0
            ids[d] = g.node((s[0] + f * (s[2] - s[0]), s[1] + f * (s[3] - s[1])))
        for d0, d1 in zip(ordered, ordered[1:]):
            g.edge(ids[d0], ids[d1])
        street_nodes.append(ids)

    attachments: dict = {}
    for key, p, i, d in feet:
        foot = street_nodes[i][round(d, 9)]
        a = g.node(p)
        g.edge(a, foot)
        attachments[key] = a

    for o in zone_objects:
        z = city.zones[o.zone_id]
        best, bd = None, np.inf
        for k, p in enumerate(z.entry_points):
            d = float(np.hypot(p[0] - o.position[0], p[1] - o.position[1]))
            if d < bd - EPS:
                best, bd = k, d
        a = g.node(o.position)
        g.edge(a, attachments[("zone", z.id, best)])
        attachments[("object", o.id)] = a

    edges = sorted((a, b, w) for (a, b), w in g.edges.items())
    nav = NavGraph(np.array(g.pos, float).reshape(-1, 2), edges, attachments, cache_size)
    nav.check_connected()
    return nav


def _seg_len(s) -> float:
    return float(np.hypot(s[2] - s[0], s[3] - s[1]))


def _nearest_street(p, streets) -> tuple[int, float, np.ndarray]:
    best = None
    for i, s in enumerate(streets):
        a = np.array(s[:2])
        b = np.array(s[2:])
        ab = b - a
        L2 = float(ab @ ab)
        t = 0.0 if L2 == 0 else min(1.0, max(0.0, float((np.asarray(p) - a) @ ab) / L2))
        q = a + t * ab
        d = float(np.hypot(*(q - np.asarray(p))))
        if best is None or d < best[0] - EPS:
            best = (d, i, t, q)
    return best[1], best[2], best[3]


def _intersect(s, o) -> Optional[float]:
    """Arclength along ``s`` where it crosses ``o`` (None if they do not meet)."""
    p = np.array(s[:2])
    r = np.array(s[2:]) - p
    q = np.array(o[:2])
    u = np.array(o[2:]) - q
    den = r[0] * u[1] - r[1] * u[0]
    if abs(den) < 1e-12:
        return None
    w = q - p
    t = (w[0] * u[1] - w[1] * u[0]) / den
    v = (w[0] * r[1] - w[1] * r[0]) / den
    if -1e-9 <= t <= 1 + 1e-9 and -1e-9 <= v <= 1 + 1e-9:
        return float(min(max(t, 0.0), 1.0) * np.hypot(*r))
    return None
