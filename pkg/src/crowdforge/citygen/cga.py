"""Shape-grammar interpreter with semantic extensions.

Rules are expanded depth first from the lot scope. Besides the geometric
operations (split, extrude, comp, t, color, NIL and ``[ ]`` scope groups)
three semantic hooks record what the geometry means: ``entrance(type)``,
``zone(type)`` and the ``@Object(tag)`` rule annotation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..rulelang import ast
from ..rulelang.errors import EvalError, RuleError
from ..rulelang.evaluator import Environment, Registry, as_number, as_text, evaluate, truthy
from .layout import EDGE_NORMALS, Layout, LayoutConfig, Lot
from .scope import (AXIS_INDEX, UP, Scope, closest_on_polygon, closest_on_segment, to2)

log = logging.getLogger(__name__)

CITY_STREAM = 0xC17


CGA_FUNCTIONS = Registry()


@CGA_FUNCTIONS.define("rand", 0, 2)
def _rand(env, lo=0.0, hi=1.0):
    lo = as_number(lo, "rand lower bound")
    hi = as_number(hi, "rand upper bound")
    if hi <= lo:
        return lo
    return float(env.rng.uniform(lo, hi))


@dataclass
class ShapeNode:
    id: int
    rule: Optional[str]
    scope: Scope
    parent: Optional[int]
    children: list = field(default_factory=list)
    color: Optional[tuple] = None
    object_tag: Optional[str] = None
    zone: Optional[int] = None
    interior: bool = False
    deleted: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.interior and not self.deleted


@dataclass
class LotResult:
    lot_id: int
    nodes: list = field(default_factory=list)
    entrances: list = field(default_factory=list)  # (type, (x, y))
    zones: list = field(default_factory=list)      # dicts: type, volume, footprint, entryPoints
    objects: list = field(default_factory=list)    # dicts: type, node, position, zone
    warnings: list = field(default_factory=list)
    error: Optional[str] = None

    def leaves(self, objects: Optional[bool] = None) -> list[ShapeNode]:
        out = [n for n in self.nodes if n.is_leaf]
        if objects is None:
            return out
        return [n for n in out if (n.object_tag is not None) == objects]


class _Cursor:
    __slots__ = ("node", "scope", "consumed", "grouped")

    def __init__(self, node: ShapeNode, scope: Scope, grouped: bool = False):
        self.node = node
        self.scope = scope
        self.consumed = False
        self.grouped = grouped


class CgaEnv(Environment):
    def __init__(self, interp: "LotInterpreter", locals_: dict):
        self.functions = CGA_FUNCTIONS
        self.rng = interp.rng
        self.interp = interp
        self.variables = locals_
        self.cursor: Optional[_Cursor] = None

    def lookup(self, name: str):
        if name in self.variables:
            return self.variables[name]
        if name in self.interp.attributes:
            return self.interp.attributes[name]
        if name.startswith("scope.") and self.cursor is not None:
            k = {"scope.sx": 0, "scope.sy": 1, "scope.sz": 2}.get(name)
            if k is not None:
                return float(self.cursor.scope.size[k])
        return self.interp.globals[name]


_COMP_KEYS = {"front", "back", "left", "right", "side", "top", "bottom", "vertical", "horizontal", "all"}


class LotInterpreter:
    """Expands the rule set on one lot."""

    def __init__(self, rules: ast.RuleFile, layout: Layout, lot: Lot, seed: int):
        self.rules = {r.name: r for r in rules.rules}
        self.rule_file = rules
        self.layout = layout
        self.config: LayoutConfig = layout.config
        self.lot = lot
        self.rng = np.random.default_rng(np.random.SeedSequence([int(seed), CITY_STREAM, lot.id]))
        self.result = LotResult(lot.id)
        W, H = layout.extent
        cx, cy = lot.center
        lot_scope = lot.scope()
        self.globals = {
            "lot.id": float(lot.id),
            "lot.u": cx / W,
            "lot.v": cy / H,
            "lot.bx": float(lot.block[0]),
            "lot.by": float(lot.block[1]),
            "lot.i": float(lot.index[0]),
            "lot.j": float(lot.index[1]),
            "lot.width": float(lot_scope.size[0]),
            "lot.depth": float(lot_scope.size[2]),
        }
        self.attributes: dict = {}
        self.street_dir3 = np.array([lot.street_dir[0], 0.0, lot.street_dir[1]])
        self.lot_x3 = lot_scope.axes[0]

    # -- driver ----------------------------------------------------------------
    def run(self, start_rule: Optional[str] = None) -> LotResult:
        start = start_rule or self.rule_file.start_rule
        try:
            env = CgaEnv(self, {})
            for a in self.rule_file.attributes:
                self.attributes[a.name] = evaluate(a.value, env)
            root = self._new_node(start, self.lot.scope(), None)
            self._derive(root, start, (), {}, 0)
        except RuleError as exc:
            self.result.error = str(exc)
            self.result.nodes = []
            self.result.entrances = []
            self.result.zones = []
            self.result.objects = []
            return self.result
        for obj in self.result.objects:
            node = self.result.nodes[obj["node"]]
            c = node.scope.center()
            obj["position"] = to2(c)
        return self.result

    def _warn(self, msg: str, pos=None) -> None:
        where = f"{pos}: " if pos is not None and getattr(pos, "line", 0) else ""
        self.result.warnings.append(f"lot {self.lot.id}: {where}{msg}")

    def _new_node(self, rule: Optional[str], scope: Scope, parent: Optional[ShapeNode]) -> ShapeNode:
        node = ShapeNode(len(self.result.nodes), rule, scope, parent.id if parent else None)
        if parent is not None:
            parent.children.append(node.id)
            parent.interior = True
            node.object_tag = parent.object_tag
            node.zone = parent.zone
            node.color = parent.color
        self.result.nodes.append(node)
        return node

    def _derive(self, node: ShapeNode, name: str, args: tuple, caller_vars: dict, depth: int, pos=None):
        if depth > self.config.maxDepth:
            raise EvalError(f"rule recursion deeper than {self.config.maxDepth}", pos)
        rule = self.rules.get(name)
        if rule is None:
            # an undefined rule name leaves the shape as a named terminal
            self._warn(f"rule {name!r} is not defined; shape kept as a leaf", pos)
            return
        if len(args) != len(rule.params):
            raise EvalError(f"rule {name} takes {len(rule.params)} argument(s), got {len(args)}", pos)
        obj = rule.annotation("Object")
        if obj is not None:
            tag = obj.args[0] if obj.args else name.lower()
            if not isinstance(tag, str) or not tag:
                raise EvalError("@Object needs a non-empty text tag", obj.pos)
            node.object_tag = tag
            self.result.objects.append({"type": tag, "node": node.id, "position": None, "zone": node.zone})
        local = dict(zip(rule.params, args))
        cursor = _Cursor(node, node.scope)
        self._run_items(cursor, ast.compiled(rule.successor), local, depth)
        node.scope = cursor.scope

    # -- successor execution ---------------------------------------------------
    def _run_items(self, cur: _Cursor, items, local: dict, depth: int) -> None:
        env = CgaEnv(self, local)
        for item in items:
            if cur.consumed:
                if not isinstance(item, ast.Placeholder):
                    self._warn("items after split/comp/NIL are ignored", getattr(item, "pos", None))
                return
            env.cursor = cur
            if isinstance(item, ast.CaseChain):
                for cond, body in item.branches:
                    if truthy(evaluate(cond, env), item.pos):
                        self._run_items(cur, body, local, depth)
                        break
                else:
                    if item.otherwise is not None:
                        self._run_items(cur, item.otherwise, local, depth)
            elif isinstance(item, ast.Placeholder):
                continue
            elif isinstance(item, ast.Group):
                inner = _Cursor(cur.node, cur.scope, grouped=True)
                self._run_items(inner, ast.compiled(item.items), dict(local), depth)
            elif isinstance(item, ast.RuleCall):
                args = tuple(evaluate(a, env) for a in item.args)
                child = self._new_node(item.name, cur.scope, cur.node)
                self._derive(child, item.name, args, local, depth + 1, item.pos)
            elif isinstance(item, ast.OpCall):
                self._op(cur, item, env, local, depth)
            else:
                raise EvalError(f"unexpected item {type(item).__name__}", getattr(item, "pos", None))
            if not cur.grouped:
                cur.node.scope = cur.scope

    def _op(self, cur: _Cursor, op: ast.OpCall, env: CgaEnv, local: dict, depth: int) -> None:
        name = op.name
        handler = getattr(self, f"_op_{name}", None)
        if handler is None:
            raise EvalError(f"unknown city operation {name!r}", op.pos)
        if name not in ("split", "comp") and op.selector is not None:
            raise EvalError(f"{name}() does not take a selector block", op.pos)
        handler(cur, op, env, local, depth)

    def _arity(self, op: ast.OpCall, lo: int, hi: Optional[int] = None) -> None:
        hi = lo if hi is None else hi
        if not lo <= len(op.args) <= hi:
            want = str(lo) if lo == hi else f"{lo}..{hi}"
            raise EvalError(f"{op.name}() takes {want} argument(s), got {len(op.args)}", op.pos)

    def _op_NIL(self, cur, op, env, local, depth):
        self._arity(op, 0)
        if not cur.grouped:
            cur.node.deleted = True
        cur.consumed = True

    def _op_color(self, cur, op, env, local, depth):
        self._arity(op, 3)
        rgb = tuple(as_number(evaluate(a, env), "color component", op.pos) for a in op.args)
        cur.node.color = rgb

    def _op_t(self, cur, op, env, local, depth):
        self._arity(op, 3)
        off = np.zeros(3)
        for k, a in enumerate(op.args):
            if isinstance(a, ast.Relative):
                off[k] = as_number(evaluate(a.operand, env), "t() offset", op.pos) * cur.scope.size[k]
            else:
                off[k] = as_number(evaluate(a, env), "t() offset", op.pos)
        cur.scope = cur.scope.moved(off)

    def _op_extrude(self, cur, op, env, local, depth):
        self._arity(op, 1)
        h = as_number(evaluate(op.args[0], env), "extrude height", op.pos)
        s = cur.scope
        axis = s.flat_axis()
        if axis is None:
            axis = 1
        size = s.size.copy()
        size[axis] = abs(h)
        origin = s.origin + (h * s.axes[axis] if h < 0 else 0.0)
        cur.scope = Scope(origin, s.axes, size)

    def _op_entrance(self, cur, op, env, local, depth):
        self._arity(op, 1)
        kind = as_text(evaluate(op.args[0], env), "entrance type", op.pos)
        if not kind.strip():
            raise EvalError("entrance type must not be empty", op.pos)
        self.result.entrances.append((kind, to2(cur.scope.origin)))

    def _op_zone(self, cur, op, env, local, depth):
        self._arity(op, 1)
        kind = as_text(evaluate(op.args[0], env), "zone type", op.pos)
        if not kind.strip():
            raise EvalError("zone type must not be empty", op.pos)
        s = cur.scope
        axis = s.flat_axis()
        if axis is not None:
            size = s.size.copy()
            size[axis] = self.config.zoneHeight
            vol = Scope(s.origin, s.axes, size)
        else:
            vol = s
        footprint = vol.footprint()
        zid = len(self.result.zones)
        self.result.zones.append({
            "type": kind, "volume": vol, "footprint": footprint,
            "entryPoints": self._entry_points(footprint),
        })
        cur.node.zone = zid

    def _entry_points(self, footprint: np.ndarray) -> list[tuple[float, float]]:
        pts: list = []
        n = len(footprint)
        for name in self.lot.street_edges:
            a, b = (np.array(p) for p in self.lot.edge(name))
            for i in range(n):
                p, q = footprint[i], footprint[(i + 1) % n]
                if _on_segment(p, a, b) and _on_segment(q, a, b) and np.hypot(*(q - p)) > 1e-9:
                    m = tuple(float(round(v, 9)) for v in 0.5 * (p + q))
                    if m not in pts:
                        pts.append(m)
        if pts:
            return pts
        centroid = footprint.mean(axis=0)
        street_pt, best = None, np.inf
        for seg in self.layout.streets:
            q = closest_on_segment(centroid, seg[:2], seg[2:])
            d = float(np.hypot(*(q - centroid)))
            if d < best - 1e-12:
                street_pt, best = q, d
        e = closest_on_polygon(street_pt, footprint)
        return [(float(e[0]), float(e[1]))]

    # -- splitting -------------------------------------------------------------
    def _op_split(self, cur, op, env, local, depth):
        self._arity(op, 1)
        if op.selector is None:
            raise EvalError("split() needs a selector block", op.pos)
        arg = op.args[0]
        if not isinstance(arg, ast.Var) or arg.name not in AXIS_INDEX:
            raise EvalError("split axis must be x, y or z", op.pos)
        axis = AXIS_INDEX[arg.name]
        extent = float(cur.scope.size[axis])
        if extent <= 1e-12:
            raise EvalError(f"cannot split along {arg.name}: the scope has no extent there", op.pos)
        sizes = []
        for entry in op.selector.entries:
            key = entry.key
            if isinstance(key, ast.Floating):
                sizes.append(("float", as_number(evaluate(key.operand, env), "split size", entry.pos)))
            elif isinstance(key, ast.Relative):
                sizes.append(("abs", as_number(evaluate(key.operand, env), "split size", entry.pos) * extent))
            else:
                sizes.append(("abs", as_number(evaluate(key, env), "split size", entry.pos)))
        for kind, v in sizes:
            if v < 0:
                raise EvalError("split sizes must be non-negative", op.pos)
        if op.selector.repeat:
            pieces = self._repeat_layout(sizes, extent, op)
        else:
            pieces = [(i, ext) for i, ext in enumerate(self._fit(sizes, extent, op))]
            if pieces:
                used = sum(e for _, e in pieces)
                if extent - used > 1e-9:
                    pieces.append((None, extent - used))  # unassigned remainder is discarded
        start = 0.0
        cur.consumed = True
        cur.node.interior = True
        for idx, ext in pieces:
            if idx is not None and ext > 1e-9:
                child = self._new_node(None, cur.scope.sub(axis, start, ext), cur.node)
                ccur = _Cursor(child, child.scope)
                self._run_items(ccur, ast.compiled(op.selector.entries[idx].items), dict(local), depth + 1)
                child.scope = ccur.scope
            start += ext

    def _fit(self, sizes, extent: float, op) -> list[float]:
        absolute = sum(v for k, v in sizes if k == "abs")
        weights = sum(v for k, v in sizes if k == "float")
        scale = 1.0
        if absolute > extent + 1e-9:
            self._warn(f"absolute split sizes {absolute:g} exceed extent {extent:g}; scaled to fit", op.pos)
            scale = extent / absolute
        rest = max(0.0, extent - absolute * scale)
        out = []
        for k, v in sizes:
            if k == "abs":
                out.append(v * scale)
            else:
                out.append(rest * v / weights if weights > 0 else 0.0)
        return out

    def _repeat_layout(self, sizes, extent: float, op) -> list:
        nominal = sum(v for _, v in sizes)
        if nominal <= 0:
            raise EvalError("repeat split pattern has zero length", op.pos)
        n = max(1, int(round(extent / nominal)))
        each = extent / n
        pattern = self._fit(sizes, each, op) if any(k == "float" for k, _ in sizes) else \
            [v * each / nominal for _, v in sizes]
        out = []
        for _ in range(n):
            out.extend(enumerate(pattern))
        return out

    # -- component split -------------------------------------------------------
    def _labels(self, normal: np.ndarray) -> set[str]:
        up = float(normal @ UP)
        if abs(up) > 0.5:
            return {"top" if up > 0 else "bottom", "horizontal", "all"}
        d = float(normal @ self.street_dir3)
        labels = {"vertical", "side", "all"}
        if d > 0.5:
            labels.add("front")
        elif d < -0.5:
            labels.add("back")
        else:
            labels.add("right" if float(normal @ self.lot_x3) > 0 else "left")
        return labels

    def _op_comp(self, cur, op, env, local, depth):
        self._arity(op, 1)
        if op.selector is None:
            raise EvalError("comp() needs a selector block", op.pos)
        arg = op.args[0]
        if not isinstance(arg, ast.Var) or arg.name != "f":
            raise EvalError("only comp(f) is supported", op.pos)
        keys = []
        for entry in op.selector.entries:
            if not isinstance(entry.key, ast.Var) or entry.key.name not in _COMP_KEYS:
                raise EvalError(f"unknown face selector; use one of {', '.join(sorted(_COMP_KEYS))}", entry.pos)
            keys.append(entry.key.name)
        s = cur.scope
        if s.is_volume:
            faces = [(f, f.axes[2]) for _, f in s.faces()]
        else:
            faces = [(s, s.axes[s.flat_axis()])]
        cur.consumed = True
        cur.node.interior = True
        for face, normal in faces:
            labels = self._labels(normal)
            for idx, key in enumerate(keys):
                if key in labels:
                    child = self._new_node(None, face, cur.node)
                    ccur = _Cursor(child, face)
                    self._run_items(ccur, ast.compiled(op.selector.entries[idx].items), dict(local), depth + 1)
                    child.scope = ccur.scope
                    break


def _on_segment(p, a, b, tol: float = 1e-6) -> bool:
    q = closest_on_segment(p, a, b)
    return float(np.hypot(*(q - np.asarray(p)))) <= tol


def run_lot(rules: ast.RuleFile, layout: Layout, lot: Lot, seed: int,
            start_rule: Optional[str] = None) -> LotResult:
    return LotInterpreter(rules, layout, lot, seed).run(start_rule)


def single_lot_layout(width: float, depth: float, street_width: float = 10.0, **kw) -> Layout:
    """A one-block, one-lot layout; handy for trying out a rule file."""
    from .layout import generate_layout
    cfg = LayoutConfig(blocksX=1, blocksY=1, lotsPerBlockX=1, lotsPerBlockY=1,
                       lotWidth=width, lotDepth=depth, streetWidth=street_width, **kw)
    return generate_layout(cfg)


__all__ = ["CGA_FUNCTIONS", "LotInterpreter", "LotResult", "ShapeNode", "run_lot", "single_lot_layout",
           "EDGE_NORMALS"]
