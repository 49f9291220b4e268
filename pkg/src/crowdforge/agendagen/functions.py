"""Built-in functions and global variables of the agenda language.

The same table serves agenda generation and delayed-rule execution during
simulation; the two differ only in the :class:`WorldView` they plug in.
"""
from __future__ import annotations

import copy
from typing import Optional

import numpy as np

from ..citygen.city import SemanticCity
from ..navgraph import NavGraph
from ..population import Household, Population
from ..rulelang.errors import EvalError
from ..rulelang.evaluator import Environment, Registry, as_entity, as_number, as_text, evaluate, truthy
from ..rulelang.values import INVALID, EntityRef, is_number, show, type_name


class WorldView:
    """City queries available to rules. Generation uses home entrances as positions."""

    def __init__(self, city: SemanticCity, nav: NavGraph, population: Population):
        self.city = city
        self.nav = nav
        self.population = population
        self._bdist: dict = {}

    def building_distance(self, b1: int, b2: int) -> float:
        key = (b1, b2) if b1 <= b2 else (b2, b1)
        d = self._bdist.get(key)
        if d is None:
            d = self.nav.building_distance(*key)
            self._bdist[key] = d
        return d

    def position_of(self, pid: int):
        home = self.population.persons[pid].home
        return self.city.buildings[home].entrances[0].position

    def object_available(self, oid: int, pid: int) -> bool:
        return True

    def reserve(self, oid: int, pid: int) -> None:
        pass


class PcgEnv(Environment):
    """Evaluation state: locals, household attributes, focus and world."""

    def __init__(self, world: WorldView, household: Household, rng: np.random.Generator,
                 variables: Optional[dict] = None, attributes: Optional[dict] = None,
                 focus: Optional[int] = None):
        self.functions = PCG_FUNCTIONS
        self.world = world
        self.household = household
        self.rng = rng
        self.variables = dict(variables or {})
        self.attributes = attributes if attributes is not None else {}
        self.focus = focus

    def clone(self) -> "PcgEnv":
        c = copy.copy(self)
        c.variables = dict(self.variables)
        return c

    def focused(self, pid: Optional[int]) -> "PcgEnv":
        c = self.clone()
        c.focus = pid
        return c

    def person(self):
        if self.focus is None:
            return None
        return self.world.population.persons[self.focus]

    def require_focus(self, what: str):
        p = self.person()
        if p is None:
            raise EvalError(f"{what} requires a focused person")
        return p

    def lookup(self, name: str):
        if name in self.variables:
            return self.variables[name]
        if name in self.attributes:
            return self.attributes[name]
        if name == "home":
            return EntityRef("building", self.household.home)
        if name == "household.id":
            return float(self.household.id)
        if name == "person.id":
            return EntityRef("person", self.focus) if self.focus is not None else -1.0
        if name == "age":
            return float(self.require_focus("age").age)
        if name == "gender":
            return bool(self.require_focus("gender").gender)
        raise KeyError(name)

    def members(self) -> list[int]:
        return list(self.household.member_ids)


PCG_FUNCTIONS = Registry()


def _building(v, what) -> Optional[int]:
    v = as_entity(v, "building", what)
    return None if v is INVALID else v.id


@PCG_FUNCTIONS.define("getDistance", 2)
def fn_get_distance(env: PcgEnv, b1, b2):
    a, b = _building(b1, "getDistance first argument"), _building(b2, "getDistance second argument")
    if a is None or b is None:
        return INVALID
    d = env.world.building_distance(a, b)
    return INVALID if not np.isfinite(d) else float(d)


@PCG_FUNCTIONS.define("getDistanceInTime", 2)
def fn_get_distance_in_time(env: PcgEnv, b1, b2):
    person = env.require_focus("getDistanceInTime")
    d = fn_get_distance(env, b1, b2)
    if d is INVALID:
        return INVALID
    return d / person.walk_speed


@PCG_FUNCTIONS.define("findBuilding", 1)
def fn_find_building(env: PcgEnv, kind):
    kind = as_text(kind, "building type")
    ids = [b.id for b in env.world.city.buildings if b.has_type(kind)]
    if not ids:
        return INVALID
    return EntityRef("building", ids[int(env.rng.integers(len(ids)))])


@PCG_FUNCTIONS.define("findNearestBuilding", 2)
def fn_find_nearest_building(env: PcgEnv, kind, ref):
    kind = as_text(kind, "building type")
    r = _building(ref, "reference building")
    if r is None:
        return INVALID
    best, bd = None, np.inf
    for b in env.world.city.buildings:
        if not b.has_type(kind):
            continue
        d = env.world.building_distance(r, b.id)
        if d < bd:
            best, bd = b.id, d
    return INVALID if best is None else EntityRef("building", best)


@PCG_FUNCTIONS.define("findObject", 1, 2)
def fn_find_object(env: PcgEnv, kind, radius=None):
    kind = as_text(kind, "object type")
    if radius is not None:
        radius = as_number(radius, "search radius")
    pid = env.focus
    if pid is not None:
        pos = env.world.position_of(pid)
    else:
        pos = env.world.city.buildings[env.household.home].entrances[0].position
    candidates = [o.id for o in env.world.city.objects_near(kind, pos, radius)
                  if env.world.object_available(o.id, pid)]
    if not candidates:
        return INVALID
    oid = candidates[int(env.rng.integers(len(candidates)))]
    env.world.reserve(oid, pid)
    return EntityRef("object", oid)


@PCG_FUNCTIONS.define("isValid", 1)
def fn_is_valid(env, v):
    return v is not INVALID


@PCG_FUNCTIONS.define("count", 0, 1, lazy=(0,))
def fn_count(env: PcgEnv, pred=None):
    members = env.members()
    if pred is None:
        return float(len(members))
    return float(sum(1 for pid in members if truthy(evaluate(pred, env.focused(pid)))))


@PCG_FUNCTIONS.define("chooseMember", 1, lazy=(0,))
def fn_choose_member(env: PcgEnv, pred):
    scores = []
    for pid in env.members():
        v = evaluate(pred, env.focused(pid))
        scores.append((pid, v))
    if not scores:
        return INVALID
    if all(isinstance(v, bool) or v is INVALID for _, v in scores):
        hits = [pid for pid, v in scores if v is True]
        if not hits:
            return INVALID
        return EntityRef("person", hits[int(env.rng.integers(len(hits)))])
    if all(is_number(v) for _, v in scores):
        top = max(float(v) for _, v in scores)
        hits = [pid for pid, v in scores if float(v) == top]
        return EntityRef("person", hits[int(env.rng.integers(len(hits)))])
    kinds = sorted({type_name(v) for _, v in scores})
    raise EvalError(f"chooseMember predicate must be boolean or numeric, got {', '.join(kinds)}")


@PCG_FUNCTIONS.define("rand", 2)
def fn_rand(env, lo, hi):
    lo = as_number(lo, "rand lower bound")
    hi = as_number(hi, "rand upper bound")
    if hi < lo:
        raise EvalError(f"rand bounds reversed: {show(lo)} > {show(hi)}")
    if hi == lo:
        return lo
    return float(env.rng.uniform(lo, hi))
