"""Per-household agenda generation by rule interpretation.

Each household gets a fresh context and its own RNG stream; the start rule
is applied and every successor item runs in order. Rule calls and ``[ ]``
groups work on a cloned context, so variables and focus set inside never
leak back to the caller, while agenda changes are global.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from .. import __version__
from ..citygen.city import SemanticCity
from ..navgraph import NavGraph
from ..population import Household, Population
from ..rulelang import ast
from ..rulelang.errors import EvalError, RuleError
from ..rulelang.evaluator import as_entity, as_number, evaluate, truthy
from ..rulelang.printer import print_rule_file
from ..rulelang.values import INVALID, EntityRef, show, type_name
from .functions import PcgEnv, WorldView
from .model import (ANCHORED_KINDS, DAY, DELAYED, GOTO, GROUP, SLOT, STAY, Agenda, AgendaSet, AgendaTask,
                    FloatingTaskEntry)

log = logging.getLogger(__name__)

AGENDA_STREAM = 0xA6E
MAX_DEPTH = 64
ALL_DAYS = frozenset(range(7))

# operations that only make sense while a delayed rule runs in the simulation
DYNAMIC_OPS = frozenset({"wait", "goToZone", "goToObject", "interact", "waitUntilNextTask", "enterBuilding"})
AGENDA_OPS = frozenset({"stayInside", "goToBuilding", "accompany", "delayedRule", "floatingSlot", "floatingTask"})


class GenerationContext:
    """Household-level interpretation state (cloned on every rule call)."""

    def __init__(self, gen: "HouseholdGenerator", env: PcgEnv, depth: int = 0,
                 day_mask: frozenset = ALL_DAYS):
        self.gen = gen
        self.env = env
        self.depth = depth
        self.day_mask = day_mask

    @property
    def focus(self) -> Optional[int]:
        return self.env.focus

    @property
    def variables(self) -> dict:
        return self.env.variables

    def clone(self, focus: Optional[int] = ..., depth: Optional[int] = None) -> "GenerationContext":
        env = self.env.clone()
        if focus is not ...:
            env.focus = focus
        return GenerationContext(self.gen, env, self.depth if depth is None else depth, self.day_mask)


def rule_name_arg(expr, what: str) -> str:
    if isinstance(expr, ast.Var):
        return expr.name
    if isinstance(expr, ast.String):
        return expr.value
    raise EvalError(f"{what} must be a rule name", getattr(expr, "pos", None))


class HouseholdGenerator:
    def __init__(self, rules: ast.RuleFile, world: WorldView, household: Household, seed: int,
                 agendas: list, pools: list):
        self.rules = {r.name: r for r in rules.rules}
        self.rule_file = rules
        self.world = world
        self.household = household
        self.agendas = agendas
        self.pools = pools
        self.rng = np.random.default_rng(np.random.SeedSequence([int(seed), AGENDA_STREAM, household.id]))
        self.warnings: list[str] = []
        self._groups = 0

    def warn(self, msg: str, pos=None) -> None:
        where = f"{pos}: " if pos is not None and getattr(pos, "line", 0) else ""
        self.warnings.append(f"household {self.household.id}: {where}{msg}")

    def run(self, start_rule: Optional[str] = None) -> None:
        env = PcgEnv(self.world, self.household, self.rng)
        for a in self.rule_file.attributes:
            env.attributes[a.name] = evaluate(a.value, env)
        ctx = GenerationContext(self, env)
        name = start_rule or self.rule_file.start_rule
        self.apply_rule(ctx, name, (), None)

    # -- rules ------------------------------------------------------------------------
    def apply_rule(self, ctx: GenerationContext, name: str, args: tuple, pos) -> None:
        rule = self.rules.get(name)
        if rule is None:
            raise EvalError(f"unknown rule {name!r}", pos)
        if len(args) != len(rule.params):
            raise EvalError(f"rule {name} takes {len(rule.params)} argument(s), got {len(args)}", pos)
        if ctx.depth + 1 > MAX_DEPTH:
            raise EvalError(f"rule calls nested deeper than {MAX_DEPTH}", pos)
        child = ctx.clone(depth=ctx.depth + 1)
        child.variables.update(zip(rule.params, args))
        self.run_items(child, ast.compiled(rule.successor))

    def run_items(self, ctx: GenerationContext, items) -> None:
        for item in items:
            if isinstance(item, ast.CaseChain):
                for cond, body in item.branches:
                    if truthy(evaluate(cond, ctx.env), item.pos):
                        self.run_items(ctx, body)
                        break
                else:
                    if item.otherwise is not None:
                        self.run_items(ctx, item.otherwise)
            elif isinstance(item, ast.Placeholder):
                continue
            elif isinstance(item, ast.Group):
                self.run_items(ctx.clone(), ast.compiled(item.items))
            elif isinstance(item, ast.RuleCall):
                args = tuple(evaluate(a, ctx.env) for a in item.args)
                self.apply_rule(ctx, item.name, args, item.pos)
            elif isinstance(item, ast.OpCall):
                self.operation(ctx, item)
            else:
                raise EvalError(f"unexpected item {type(item).__name__}", getattr(item, "pos", None))

    # -- operations ---------------------------------------------------------------------
    def operation(self, ctx: GenerationContext, op: ast.OpCall) -> None:
        name = op.name
        if name in DYNAMIC_OPS:
            self.warn(f"{name}() only runs inside a delayed rule; ignored during generation", op.pos)
            return
        if name == "members":
            return self.op_members(ctx, op)
        if op.selector is not None:
            raise EvalError(f"{name}() does not take a selector block", op.pos)
        handler = _OPS.get(name)
        if handler is None:
            raise EvalError(f"unknown operation {name!r}", op.pos)
        lo, hi = _ARITY[name]
        if not lo <= len(op.args) <= hi:
            want = str(lo) if lo == hi else f"{lo}..{hi}"
            raise EvalError(f"{name}() takes {want} argument(s), got {len(op.args)}", op.pos)
        if name in AGENDA_OPS and ctx.focus is None:
            self.warn(f"{name}() with no focused person; skipped", op.pos)
            return
        handler(self, ctx, op)

    def _window(self, ctx, op, t0e, t1e) -> Optional[tuple[float, float]]:
        t0 = as_number(evaluate(t0e, ctx.env), f"{op.name} start time", op.pos)
        t1 = as_number(evaluate(t1e, ctx.env), f"{op.name} end time", op.pos)
        if t1 < t0:
            raise EvalError(f"{op.name}: end time {show(t1)} before start {show(t0)}", op.pos)
        c0, c1 = min(max(t0, 0.0), DAY), min(max(t1, 0.0), DAY)
        if (c0, c1) != (t0, t1):
            self.warn(f"{op.name}: window [{show(t0)}, {show(t1)}] clamped to the day", op.pos)
            if c1 <= c0:
                return None
        return c0, c1

    def _building_arg(self, ctx, op, expr) -> int:
        v = evaluate(expr, ctx.env)
        if v is INVALID:
            raise EvalError(f"{op.name}: invalid building", op.pos)
        v = as_entity(v, "building", f"{op.name} building", op.pos)
        return v.id

    def _insert(self, pid: int, task: AgendaTask) -> None:
        self.agendas[pid].insert(task)

    def op_set(self, ctx, op):
        if not isinstance(op.args[0], ast.Var):
            raise EvalError("set() needs a variable name first", op.pos)
        ctx.variables[op.args[0].name] = evaluate(op.args[1], ctx.env)

    def op_stay_inside(self, ctx, op):
        w = self._window(ctx, op, op.args[0], op.args[1])
        b = self._building_arg(ctx, op, op.args[2])
        if w is None:
            return
        if w[1] == w[0]:
            raise EvalError("stayInside: empty time window", op.pos)
        self._insert(ctx.focus, AgendaTask(w[0], w[1], STAY, b))

    def op_go_to_building(self, ctx, op):
        w = self._window(ctx, op, op.args[0], op.args[1])
        b = self._building_arg(ctx, op, op.args[2])
        if w is None or w[1] == w[0]:
            return  # zero travel time: nothing to walk
        self._insert(ctx.focus, AgendaTask(w[0], w[1], GOTO, b))

    def op_delayed_rule(self, ctx, op):
        w = self._window(ctx, op, op.args[0], op.args[1])
        name = rule_name_arg(op.args[2], "delayedRule third argument")
        if name not in self.rules:
            raise EvalError(f"delayedRule: unknown rule {name!r}", op.pos)
        if w is None:
            return
        if w[1] == w[0]:
            raise EvalError("delayedRule: empty time window", op.pos)
        self._insert(ctx.focus, AgendaTask(w[0], w[1], DELAYED, rule=name, bindings=self._snapshot(ctx)))

    def _snapshot(self, ctx) -> tuple:
        merged = dict(ctx.env.attributes)
        merged.update(ctx.variables)
        return tuple(sorted(merged.items()))

    def op_floating_slot(self, ctx, op):
        w = self._window(ctx, op, op.args[0], op.args[1])
        if w is None:
            return
        if w[1] == w[0]:
            raise EvalError("floatingSlot: empty time window", op.pos)
        self._insert(ctx.focus, AgendaTask(w[0], w[1], SLOT))

    def op_floating_task(self, ctx, op):
        dur = as_number(evaluate(op.args[0], ctx.env), "floatingTask duration", op.pos)
        if dur <= 0:
            raise EvalError("floatingTask: duration must be positive", op.pos)
        name = rule_name_arg(op.args[1], "floatingTask second argument")
        if name not in self.rules:
            raise EvalError(f"floatingTask: unknown rule {name!r}", op.pos)
        prio = 0.0
        if len(op.args) > 2:
            prio = as_number(evaluate(op.args[2], ctx.env), "floatingTask priority", op.pos)
        self.pools[ctx.focus].append(FloatingTaskEntry(ctx.focus, dur, name, prio, self._snapshot(ctx)))

    def op_accompany(self, ctx, op):
        leader = ctx.focus
        time = as_number(evaluate(op.args[0], ctx.env), "accompany time", op.pos)
        cond = op.args[1]
        matches = [pid for pid in self.household.member_ids
                   if pid != leader and truthy(evaluate(cond, ctx.env.focused(pid)), op.pos)]
        if not matches:
            self.warn("accompany: no other member matches the condition; skipped", op.pos)
            return
        first = None
        for pid in matches:
            entry = self.agendas[pid].at(time)
            if entry is not None:
                first = (pid, entry)
                break
        if first is None:
            self.warn(f"accompany: no matching member has a task at {show(time)}; skipped", op.pos)
            return
        _, ref = first
        if ref.kind not in ANCHORED_KINDS or ref.building is None:
            self.warn(f"accompany: the task at {show(time)} ({ref.kind}) has no target building; skipped", op.pos)
            return
        group_members = []
        for pid in matches:
            entry = self.agendas[pid].at(time)
            if entry is not None and entry.kind == ref.kind and entry.building == ref.building:
                group_members.append((pid, entry))
        gid = f"h{self.household.id}.g{self._groups}"
        self._groups += 1
        for pid, entry in group_members:
            ag = self.agendas[pid]
            i = ag.tasks.index(entry)
            ag.replace_task(i, AgendaTask(entry.t0, entry.t1, entry.kind, entry.building, entry.rule,
                                          entry.bindings, leader, (), gid))
        self._insert(leader, AgendaTask(ref.t0, ref.t1, GROUP, ref.building, leader=leader,
                                        members=tuple(pid for pid, _ in group_members), group=gid))

    def op_members(self, ctx, op):
        if op.args:
            raise EvalError("members takes no arguments", op.pos)
        if op.selector is None:
            raise EvalError("members needs a selector block", op.pos)
        entries = op.selector.entries
        cached: dict[int, object] = {}
        for pid in self.household.member_ids:
            member_ctx = ctx.clone(focus=pid)
            for k, entry in enumerate(entries):
                if k in cached:
                    v = cached[k]
                else:
                    v = evaluate(entry.key, member_ctx.env)
                    if not isinstance(v, bool):
                        cached[k] = v  # references are chosen once per members execution
                if isinstance(v, bool):
                    hit = v
                elif v is INVALID:
                    hit = False
                elif isinstance(v, EntityRef) and v.kind == "person":
                    hit = v.id == pid
                else:
                    raise EvalError(f"members selector must be boolean or a person, got {type_name(v)}",
                                    entry.pos)
                if hit:
                    self.run_items(member_ctx, ast.compiled(entry.items))
                    break


_OPS = {
    "set": HouseholdGenerator.op_set,
    "stayInside": HouseholdGenerator.op_stay_inside,
    "goToBuilding": HouseholdGenerator.op_go_to_building,
    "accompany": HouseholdGenerator.op_accompany,
    "delayedRule": HouseholdGenerator.op_delayed_rule,
    "floatingSlot": HouseholdGenerator.op_floating_slot,
    "floatingTask": HouseholdGenerator.op_floating_task,
}
_ARITY = {"set": (2, 2), "stayInside": (3, 3), "goToBuilding": (3, 3), "accompany": (2, 2),
          "delayedRule": (3, 3), "floatingSlot": (2, 2), "floatingTask": (2, 3)}


def generate_all_agendas(rules: ast.RuleFile, population: Population, city: SemanticCity, nav: NavGraph,
                         seed: int, start_rule: Optional[str] = None, meta: Optional[dict] = None,
                         world: Optional[WorldView] = None) -> AgendaSet:
    world = world or WorldView(city, nav, population)
    agendas = [Agenda(p.id) for p in population.persons]
    pools: list = [[] for _ in population.persons]
    diagnostics: list[str] = []
    for hh in population.households:
        gen = HouseholdGenerator(rules, world, hh, seed, agendas, pools)
        try:
            gen.run(start_rule)
        except RuleError as exc:
            path = rules.path
            diagnostics.extend(gen.warnings)
            diagnostics.append(f"household {hh.id}: generation aborted: "
                               f"{exc.with_path(path) if path and not exc.path else exc}")
            for pid in hh.member_ids:
                agendas[pid] = Agenda(pid)
                pools[pid] = []
            continue
        diagnostics.extend(gen.warnings)
    for p in population.persons:
        agendas[p.id].finalize(p.home)
    m = {"tool": "crowdforge", "version": __version__, "seed": int(seed)}
    m.update(meta or {})
    return AgendaSet(agendas, pools, print_rule_file(rules), int(seed), m, diagnostics)
