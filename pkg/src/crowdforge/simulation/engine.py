"""Day simulation: persons follow their agendas on the navigation graph.

Time advances in fixed ticks of ``dt`` seconds. Everything that changes a
person's state happens at a tick boundary: task starts, arrivals, the end of
a ``wait`` and the end of a rule's time bound. Because walking speeds are
constant, each of these ticks is known in advance, so they are kept in a
heap and ticks with nothing to do are skipped. The outcome is the same as
checking every condition on every tick.
"""
from __future__ import annotations

import heapq
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..agendagen.functions import PcgEnv, WorldView
from ..agendagen.generator import AGENDA_OPS
from ..agendagen.model import (ANCHORED_KINDS, DAY, DELAYED, GOTO, GROUP, MOVEMENT_KINDS, SLOT, STAY,
                               AgendaSet, AgendaTask)
from ..citygen.city import SemanticCity
from ..errors import SimulationError
from ..kernels import positions_along
from ..navgraph import NavGraph, Path
from ..population import Population
from ..rulelang import ast
from ..rulelang.errors import EvalError, RuleError
from ..rulelang.evaluator import as_entity, as_number, as_text, evaluate, truthy
from ..rulelang.parser import parse_rule_file
from ..rulelang.values import INVALID, show
from .records import ENTER, EXIT, INIT, BuildingEvent, OccupancyTable

log = logging.getLogger(__name__)

SIM_STREAM = 0x51A
WALKING, IDLE, INTERACTING, GROUPED = "walking", "idle", "interacting", "grouped"
EPS = 1e-9


@dataclass
class SimConfig:
    dt: float = 0.25
    sample_interval: float = 60.0
    interaction_range: float = 1.5
    max_rule_depth: int = 64

    def validate(self) -> None:
        if not self.dt > 0:
            raise SimulationError("dt must be positive")
        if not self.sample_interval > 0:
            raise SimulationError("sample interval must be positive")


def fmt_time(t: float) -> str:
    t = float(t)
    h, rem = divmod(t, 3600.0)
    m, s = divmod(rem, 60.0)
    return f"{int(h):02d}:{int(m):02d}:{s:05.2f}"


class Walk:
    """Constant-speed progress along a path from an exact start time.

    Start and arrival times are not rounded to ticks, so the fraction of a
    tick left over at the end of one trip carries into the next one.
    """

    __slots__ = ("path", "start_time", "speed", "offset", "purpose", "target", "group", "arrival_time",
                 "arrival_tick")

    def __init__(self, path: Path, start_time: float, speed: float, offset: float, purpose: str,
                 target: Optional[int] = None, group: Optional[str] = None):
        self.path = path
        self.start_time = start_time
        self.speed = speed
        self.offset = offset
        self.purpose = purpose
        self.target = target
        self.group = group
        self.arrival_time = start_time + max(0.0, path.total_length - offset) / speed
        self.arrival_tick = 0

    @property
    def length(self) -> float:
        return self.path.total_length

    def distance_at_time(self, t: float) -> float:
        d = self.offset + (t - self.start_time) * self.speed
        return min(self.path.total_length, max(self.offset, d))

    def position_at_time(self, t: float) -> tuple:
        return self.path.position_at(self.distance_at_time(t), warn=False)


class Agent:
    __slots__ = ("person_id", "position", "walk", "state", "object_id", "group")

    def __init__(self, person_id: int, position):
        self.person_id = person_id
        self.position = (float(position[0]), float(position[1]))
        self.walk: Optional[Walk] = None
        self.state = IDLE
        self.object_id: Optional[int] = None
        self.group: Optional[str] = None


class Frame:
    __slots__ = ("items", "index", "env")

    def __init__(self, items, env: PcgEnv):
        self.items = items
        self.index = 0
        self.env = env


class ExecutionContext:
    """A running delayed rule: a stack of (successor items, next index) frames."""

    def __init__(self, pid: int, rule: ast.Rule, env: PcgEnv, bound_tick: Optional[int], floating: bool):
        self.person_id = pid
        self.rule = rule
        self.frames = [Frame(ast.compiled(rule.successor), env)]
        self.bound_tick = bound_tick
        self.floating = floating
        self.blocking: Optional[tuple] = None
        self.token = 0
        self.reservations: set = set()
        self.holds: set = set()


class PersonState:
    __slots__ = ("pid", "inside", "agent", "task_index", "busy", "context", "epoch", "pool", "slot", "group",
                 "free_time")

    def __init__(self, pid: int, pool: list):
        self.pid = pid
        self.inside: Optional[int] = None
        self.agent: Optional[Agent] = None
        self.task_index = -1
        self.busy: Optional[str] = None     # "move" while walking a movement task, "group" while grouped
        self.context: Optional[ExecutionContext] = None
        self.epoch = 0
        self.pool = pool
        self.slot: Optional[AgendaTask] = None
        self.group: Optional[str] = None
        self.free_time = -math.inf          # exact time the last trip ended


class GroupRun:
    def __init__(self, gid: str, leader: int, members: list, target: int):
        self.gid = gid
        self.leader = leader
        self.members = members
        self.target = target
        self.participants = [leader] + members
        self.rendezvous = None
        self.rendezvous_building: Optional[int] = None
        self.pending: set = set()
        self.ready: dict = {}               # participant -> exact time it reached the meeting point
        self.walk: Optional[Walk] = None


@dataclass(frozen=True)
class PersonView:
    person_id: int
    inside: Optional[int]
    position: Optional[tuple]
    state: str
    task_index: int
    task_kind: str


class SimWorld(WorldView):
    """World queries for rules running inside the simulation."""

    def __init__(self, sim: "Simulation"):
        super().__init__(sim.city, sim.nav, sim.population)
        self.sim = sim

    def position_of(self, pid: int):
        return self.sim.position_of(pid)

    def object_available(self, oid: int, pid: int) -> bool:
        return self.sim.occupancy.available(oid, pid)

    def reserve(self, oid: int, pid: int) -> None:
        self.sim.reserve(oid, pid)


Sampler = Callable[[int, float, np.ndarray, np.ndarray, list, list], None]


class Simulation:
    def __init__(self, city: SemanticCity, nav: NavGraph, population: Population, agendas: AgendaSet,
                 seed: int = 0, config: Optional[SimConfig] = None, rules: Optional[ast.RuleFile] = None):
        self.city = city
        self.nav = nav
        self.population = population
        self.agendas = agendas
        self.seed = int(seed)
        self.config = config or SimConfig()
        self.config.validate()
        self.dt = float(self.config.dt)
        if len(agendas.agendas) != len(population.persons):
            raise SimulationError(f"{len(agendas.agendas)} agendas for {len(population.persons)} persons")
        if rules is None:
            rules = parse_rule_file(agendas.rules_source, "<agendas>") if agendas.rules_source.strip() else None
        self.rules = {r.name: r for r in rules.rules} if rules is not None else {}
        self.world = SimWorld(self)
        self.occupancy = OccupancyTable({o.id: o.capacity for o in city.objects})
        self.entrance_pos = {b.id: tuple(float(v) for v in nav.positions[nav.building_node(b.id)])
                             for b in city.buildings if b.entrances}
        self.object_pos = {o.id: (float(o.position[0]), float(o.position[1])) for o in city.objects}
        # group id -> leader, for groups whose leader task survived agenda generation
        self.group_leaders: dict[str, int] = {}
        for ag in agendas.agendas:
            for t in ag.tasks:
                if t.kind == GROUP and t.group is not None:
                    self.group_leaders[t.group] = ag.owner
        self.rngs = [np.random.default_rng(np.random.SeedSequence([self.seed, SIM_STREAM, p.id]))
                     for p in population.persons]
        self.persons = [PersonState(p.id, list(agendas.pools[p.id])) for p in population.persons]
        self.events: list[BuildingEvent] = []
        self.incidents: list[str] = []
        self.samplers: list[Sampler] = []
        self.groups: dict[str, GroupRun] = {}
        self.finished_groups: set = set()
        self.waiting: dict[str, set] = defaultdict(set)
        self.interactions: list[tuple] = []   # (tick, person, object) each time a hold starts
        self.tick = 0
        self._heap: list = []
        self._seq = 0
        self._next_sample = 0
        self.sample_every = max(1, int(round(self.config.sample_interval / self.dt)))
        self.initialized = False

    # -- clock -------------------------------------------------------------------------------
    @property
    def time(self) -> float:
        return self.tick * self.dt

    def tick_of(self, t: float) -> int:
        """First tick at or after time ``t``."""
        return int(math.ceil(t / self.dt - EPS))

    def _schedule(self, tick: int, kind: str, pid: int, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (max(tick, self.tick), self._seq, kind, pid, payload))

    def incident(self, pid: Optional[int], msg: str) -> None:
        who = f"person {pid}" if pid is not None else "world"
        line = f"{fmt_time(self.time)} {who}: {msg}"
        self.incidents.append(line)
        log.info(line)

    # -- initialization (interpolating agendas) ----------------------------------------------
    def initialize(self, t: float = 0.0, fresh_pools: bool = True) -> None:
        """Place every person from its agenda at time ``t``: inside a building or on a path."""
        tick = int(round(t / self.dt))
        if abs(tick * self.dt - t) > 1e-6:
            log.warning("start time %s is not a multiple of dt; snapped to %s", t, tick * self.dt)
        self.tick = tick
        self._heap.clear()
        self.groups.clear()
        self.finished_groups.clear()
        self.waiting.clear()
        self.occupancy.reset()
        for ps in self.persons:
            ps.epoch += 1
            ps.inside = None
            ps.agent = None
            ps.busy = None
            ps.context = None
            ps.slot = None
            ps.group = None
            if fresh_pools:
                ps.pool = list(self.agendas.pools[ps.pid])
        T = self.time % DAY
        placed: set = set()
        # moving groups first, so their members are placed together
        for ps in self.persons:
            tasks = self.agendas.agendas[ps.pid].tasks
            if not tasks:
                continue
            i = self.agendas.agendas[ps.pid].index_at(T)
            task = tasks[i]
            if task.kind == GROUP and self._transition_source(tasks, i, T) is not None:
                self._place_group(ps.pid, i, T, placed)
        starts = []
        for ps in self.persons:
            if ps.pid in placed:
                continue
            ag = self.agendas.agendas[ps.pid]
            home = self.population.persons[ps.pid].home
            if not ag.tasks:
                self._set_inside(ps.pid, home, INIT)
                continue
            i = ag.index_at(T)
            task = ag.tasks[i]
            ps.task_index = i
            src = self._transition_source(ag.tasks, i, T)
            if src is not None and not self._place_walker(ps.pid, src, task, T):
                src = None
            if src is None:
                b = task.building if task.building is not None else home
                if b not in self.entrance_pos:
                    b = home
                self._set_inside(ps.pid, b, INIT)
                if task.kind in (DELAYED, SLOT):
                    starts.append(ps.pid)
            self._schedule_next(ps.pid)
        for pid in starts:
            ps = self.persons[pid]
            task = self.agendas.agendas[pid].tasks[ps.task_index]
            if task.kind == DELAYED:
                self._start_context(pid, task.rule, task.bindings, None, False)
            else:
                ps.slot = task
                self._schedule_floating(pid)
        self._next_sample = -(-self.tick // self.sample_every) * self.sample_every
        self.initialized = True

    @staticmethod
    def _transition_source(tasks: list, i: int, T: float) -> Optional[int]:
        """Source building when the task at ``T`` is a trip that follows a building-anchored task."""
        task = tasks[i]
        if task.kind not in MOVEMENT_KINDS or task.building is None or not task.t0 <= T < task.t1:
            return None
        if i == 0:
            return None
        prev = tasks[i - 1]
        if prev.kind not in ANCHORED_KINDS or prev.building is None:
            return None
        return prev.building

    def _place_walker(self, pid: int, src: int, task: AgendaTask, T: float) -> bool:
        path = self.nav.shortest_path(("entrance", src, 0), ("entrance", task.building, 0))
        if path is INVALID or path.total_length <= EPS:
            return False
        frac = (T - task.t0) / (task.t1 - task.t0)
        ps = self.persons[pid]
        agent = Agent(pid, (0.0, 0.0))
        walk = self._arm(Walk(path, self.time, self.population.persons[pid].walk_speed, frac * path.total_length,
                              "task", task.building))
        agent.walk = walk
        agent.state = WALKING
        agent.position = walk.position_at_time(self.time)
        ps.agent = agent
        ps.busy = "move"
        self._schedule(walk.arrival_tick, "arrive", pid, walk)
        return True

    def _place_group(self, leader: int, i: int, T: float, placed: set) -> None:
        tasks = self.agendas.agendas[leader].tasks
        task = tasks[i]
        src = self._transition_source(tasks, i, T)
        path = self.nav.shortest_path(("entrance", src, 0), ("entrance", task.building, 0))
        if path is INVALID or path.total_length <= EPS:
            return
        members = []
        for m in task.members:
            mag = self.agendas.agendas[m]
            j = mag.index_at(T)
            mt = mag.tasks[j]
            if mt.group == task.group and self._transition_source(mag.tasks, j, T) is not None:
                members.append((m, j))
        grun = GroupRun(task.group, leader, [m for m, _ in members], task.building)
        speed = min(self.population.persons[p].walk_speed for p in grun.participants)
        frac = (T - task.t0) / (task.t1 - task.t0)
        walk = self._arm(Walk(path, self.time, speed, frac * path.total_length, "group", task.building, task.group))
        grun.walk = walk
        for p, j in [(leader, i)] + members:
            ps = self.persons[p]
            ps.task_index = j
            ps.busy = "group"
            ps.group = task.group
            agent = Agent(p, walk.position_at_time(self.time))
            agent.walk = walk
            agent.state = GROUPED
            agent.group = task.group
            ps.agent = agent
            placed.add(p)
            self._schedule_next(p)
        self.groups[task.group] = grun
        self._schedule(walk.arrival_tick, "group_arrive", leader, (grun, walk))

    def time_jump(self, delta: float) -> None:
        """Jump forward by ``delta`` seconds; persons are re-placed from their agendas."""
        if not delta > 0:
            raise SimulationError("time jump must be positive")
        for ps in self.persons:
            if ps.context is not None:
                self._end_context(ps.pid)
        t = (self.time + delta) % DAY if self.time + delta >= DAY else self.time + delta
        self.initialize(t, fresh_pools=False)

    # -- main loop ----------------------------------------------------------------------------
    def run_until(self, t_end: float) -> None:
        """Process every tick up to and including the one at ``t_end`` (samples stop before it)."""
        if not self.initialized:
            self.initialize(0.0)
        end = int(round(t_end / self.dt))
        if end < self.tick:
            raise SimulationError(f"cannot run backwards to {fmt_time(t_end)}")
        while True:
            ev = self._heap[0][0] if self._heap else None
            k = self._next_sample if ev is None else min(ev, self._next_sample)
            if k > end:
                break
            self.tick = max(self.tick, k)
            while self._heap and self._heap[0][0] <= self.tick:
                _, _, kind, pid, payload = heapq.heappop(self._heap)
                self._dispatch(kind, pid, payload)
            if self.tick == self._next_sample:
                if self.tick < end:
                    self._sample()
                    self._next_sample += self.sample_every
                else:
                    break
        self.tick = end

    def step(self) -> None:
        """Advance by exactly one tick."""
        self.run_until((self.tick + 1) * self.dt)

    def _dispatch(self, kind: str, pid: int, payload) -> None:
        ps = self.persons[pid]
        if kind == "task":
            epoch, i = payload
            if epoch != ps.epoch or i <= ps.task_index or ps.busy is not None:
                return
            self._enter_task(pid, i)
        elif kind == "arrive":
            if ps.agent is not None and ps.agent.walk is payload:
                self._on_arrival(pid, payload)
        elif kind == "group_arrive":
            grun, walk = payload
            if self.groups.get(grun.gid) is grun and grun.walk is walk:
                self._group_arrive(grun)
        elif kind == "wake":
            ctx, token = payload
            if ps.context is ctx and ctx.token == token:
                ctx.blocking = None
                self._run_context(pid)
        elif kind == "ctx_end":
            if ps.context is payload:
                self._end_context(pid)
                if payload.floating:
                    self._schedule_floating(pid)

    # -- agenda following ------------------------------------------------------------------
    def _schedule_next(self, pid: int) -> None:
        ps = self.persons[pid]
        tasks = self.agendas.agendas[pid].tasks
        j = ps.task_index + 1
        if 0 < j < len(tasks):
            self._schedule(self.tick_of(tasks[j].t0), "task", pid, (ps.epoch, j))

    def _enter_task(self, pid: int, i: int) -> None:
        ps = self.persons[pid]
        tasks = self.agendas.agendas[pid].tasks
        self._end_context(pid)
        ps.task_index = i
        ps.slot = None
        self._schedule_next(pid)
        task = tasks[i]
        if task.kind == STAY:
            self._stop_walk(pid)
            if ps.inside != task.building:
                if self._start_walk(pid, ("entrance", task.building, 0), "catchup", task.building,
                                    start_time=self._task_start(pid)) is None:
                    self.incident(pid, f"no path to building {task.building}; staying put")
        elif task.kind == GOTO:
            gid = task.group
            if gid is not None and gid in self.group_leaders and self.group_leaders[gid] != pid \
                    and gid not in self.finished_groups:
                if gid not in self.groups:
                    self._stop_walk(pid)
                    ps.busy = "group"
                    ps.group = gid
                    self.waiting[gid].add(pid)
                return
            self._go_task(pid, task.building)
        elif task.kind == GROUP:
            self._launch_group(pid, task)
        elif task.kind == DELAYED:
            self._start_context(pid, task.rule, task.bindings, None, False)
        elif task.kind == SLOT:
            ps.slot = task
            self._schedule_floating(pid)

    def _go_task(self, pid: int, building: int) -> None:
        ps = self.persons[pid]
        self._stop_walk(pid)
        if ps.inside == building:
            return
        if self._start_walk(pid, ("entrance", building, 0), "task", building,
                            start_time=self._task_start(pid)) is None:
            self.incident(pid, f"no path to building {building}; task skipped")
            return
        ps.busy = "move"

    def _resume(self, pid: int) -> None:
        """Continue with the agenda after a trip that may have overrun later task starts."""
        ps = self.persons[pid]
        ps.busy = None
        tasks = self.agendas.agendas[pid].tasks
        now = self.time
        j = ps.task_index + 1
        while j < len(tasks) and tasks[j].t0 <= now + EPS:
            t = tasks[j]
            if t.t1 <= now + EPS and t.kind not in MOVEMENT_KINDS:
                if t.kind in (DELAYED, SLOT):
                    self.incident(pid, f"{t.kind} task {fmt_time(t.t0)}-{fmt_time(t.t1)} skipped after a late arrival")
                ps.task_index = j
                j += 1
                continue
            self._enter_task(pid, j)
            return
        self._schedule_next(pid)

    # -- movement -----------------------------------------------------------------------------
    def _location(self, pid: int):
        ps = self.persons[pid]
        if ps.inside is not None:
            return ("entrance", ps.inside, 0)
        return self.position_of(pid)

    def position_of(self, pid: int) -> tuple:
        ps = self.persons[pid]
        if ps.inside is not None:
            return self.entrance_pos[ps.inside]
        a = ps.agent
        if a.walk is not None:
            return a.walk.position_at_time(self.time)
        return a.position

    def _set_inside(self, pid: int, building: int, kind: str = ENTER) -> None:
        ps = self.persons[pid]
        ps.inside = building
        ps.agent = None
        self.events.append(BuildingEvent(self.tick, self.time, pid, kind, building))

    def _exit(self, pid: int) -> None:
        ps = self.persons[pid]
        b = ps.inside
        self.events.append(BuildingEvent(self.tick, self.time, pid, EXIT, b))
        ps.inside = None
        ps.agent = Agent(pid, self.entrance_pos[b])

    def _stop_walk(self, pid: int) -> None:
        a = self.persons[pid].agent
        if a is not None and a.walk is not None:
            a.position = a.walk.position_at_time(self.time)
            a.walk = None
            if a.state == WALKING:
                a.state = IDLE

    def _arm(self, walk: Walk) -> Walk:
        walk.arrival_tick = max(self.tick, self.tick_of(walk.arrival_time))
        return walk

    def _task_start(self, pid: int) -> float:
        """Exact start of a trip triggered by the current task: its start time or the end of the last trip."""
        ps = self.persons[pid]
        task = self.agendas.agendas[pid].tasks[ps.task_index]
        return min(self.time, max(task.t0, ps.free_time))

    def _start_walk(self, pid: int, dest, purpose: str, target: Optional[int] = None,
                    group: Optional[str] = None, start_time: Optional[float] = None) -> Optional[Walk]:
        ps = self.persons[pid]
        path = self.nav.shortest_path(self._location(pid), dest)
        if path is INVALID:
            return None
        if ps.inside is not None:
            self._exit(pid)
        else:
            self._stop_walk(pid)
        a = ps.agent
        start = self.time if start_time is None else min(self.time, start_time)
        walk = self._arm(Walk(path, start, self.population.persons[pid].walk_speed, 0.0, purpose, target, group))
        a.walk = walk
        if a.state != GROUPED:
            a.state = WALKING
        self._schedule(walk.arrival_tick, "arrive", pid, walk)
        return walk

    def _on_arrival(self, pid: int, walk: Walk) -> None:
        ps = self.persons[pid]
        a = ps.agent
        a.position = tuple(float(v) for v in walk.path.polyline[-1])
        a.walk = None
        ps.free_time = walk.arrival_time
        if a.state == WALKING:
            a.state = IDLE
        if walk.purpose == "task":
            self._set_inside(pid, walk.target)
            self._resume(pid)
        elif walk.purpose == "catchup":
            self._set_inside(pid, walk.target)
        elif walk.purpose == "dyn":
            if walk.target is not None:
                self._set_inside(pid, walk.target)
            ctx = ps.context
            if ctx is not None and ctx.blocking == ("walk", walk):
                ctx.blocking = None
                self._run_context(pid)
        elif walk.purpose == "rendezvous":
            grun = self.groups.get(walk.group)
            if grun is not None:
                grun.ready[pid] = walk.arrival_time
                grun.pending.discard(pid)
                if not grun.pending:
                    self._depart(grun)

    # -- groups -------------------------------------------------------------------------------
    def _launch_group(self, leader: int, task: AgendaTask) -> None:
        gid = task.group
        members = [m for m in task.members if self.persons[m].busy != "group" or self.persons[m].group == gid]
        grun = GroupRun(gid, leader, members, task.building)
        self.groups[gid] = grun
        for m in members:
            ps = self.persons[m]
            self._end_context(m)
            self._stop_walk(m)
            ps.busy = "group"
            ps.group = gid
            tasks = self.agendas.agendas[m].tasks
            for j in range(max(ps.task_index, 0), len(tasks)):
                if tasks[j].group == gid:
                    if j > ps.task_index:
                        ps.task_index = j
                        self._schedule_next(m)
                    break
        self.waiting.pop(gid, None)
        lps = self.persons[leader]
        lps.busy = "group"
        lps.group = gid
        ref = members[0] if members else leader
        rps = self.persons[ref]
        if rps.inside is not None:
            grun.rendezvous = ("entrance", rps.inside, 0)
            grun.rendezvous_building = rps.inside
        else:
            grun.rendezvous = self.position_of(ref)
        t_ready = min(self.time, task.t0)
        for p in list(grun.participants):
            ps = self.persons[p]
            if grun.rendezvous_building is not None and ps.inside == grun.rendezvous_building:
                grun.ready[p] = max(t_ready, ps.free_time)
                continue
            walk = self._start_walk(p, grun.rendezvous, "rendezvous", group=gid,
                                    start_time=max(t_ready, ps.free_time))
            if walk is None:
                self.incident(p, f"cannot reach the meeting point of group {gid}; leaving the group")
                grun.participants.remove(p)
                ps.busy = None
                ps.group = None
                continue
            ps.agent.state = GROUPED
            ps.agent.group = gid
            grun.pending.add(p)
        if not grun.pending:
            self._depart(grun)

    def _depart(self, grun: GroupRun) -> None:
        for p in grun.participants:
            if self.persons[p].inside is not None:
                self._exit(p)
        path = self.nav.shortest_path(grun.rendezvous, ("entrance", grun.target, 0))
        if path is INVALID:
            self.incident(grun.leader, f"group {grun.gid} has no path to building {grun.target}; disbanded")
            self._dissolve(grun)
            return
        speed = min(self.population.persons[p].walk_speed for p in grun.participants)
        start = min(self.time, max(grun.ready.values()))
        walk = self._arm(Walk(path, start, speed, 0.0, "group", grun.target, grun.gid))
        grun.walk = walk
        for p in grun.participants:
            a = self.persons[p].agent
            a.walk = walk
            a.state = GROUPED
            a.group = grun.gid
        self._schedule(walk.arrival_tick, "group_arrive", grun.leader, (grun, walk))

    def _group_arrive(self, grun: GroupRun) -> None:
        for p in grun.participants:
            self._set_inside(p, grun.target)
            self.persons[p].free_time = grun.walk.arrival_time
        self._dissolve(grun)

    def _dissolve(self, grun: GroupRun) -> None:
        self.groups.pop(grun.gid, None)
        self.finished_groups.add(grun.gid)
        for p in grun.participants:
            ps = self.persons[p]
            ps.group = None
            if ps.agent is not None:
                self._stop_walk(p)
                ps.agent.state = IDLE
                ps.agent.group = None
        for p in grun.participants:
            self._resume(p)

    # -- delayed rules ----------------------------------------------------------------------
    def reserve(self, oid: int, pid: int) -> None:
        if self.occupancy.reserve(oid, pid):
            ctx = self.persons[pid].context
            if ctx is not None:
                ctx.reservations.add(oid)

    def _start_context(self, pid: int, rule_name: str, bindings, bound_tick: Optional[int], floating: bool) -> None:
        ps = self.persons[pid]
        rule = self.rules.get(rule_name)
        if rule is None:
            self.incident(pid, f"unknown rule {rule_name!r}; nothing to run")
            return
        if rule.params:
            self.incident(pid, f"rule {rule_name} expects arguments and cannot run as a delayed rule")
            return
        hh = self.population.households[self.population.persons[pid].household_id]
        env = PcgEnv(self.world, hh, self.rngs[pid], variables=dict(bindings or ()), attributes={}, focus=pid)
        ctx = ExecutionContext(pid, rule, env, bound_tick, floating)
        ps.context = ctx
        if bound_tick is not None:
            self._schedule(bound_tick, "ctx_end", pid, ctx)
        self._run_context(pid)

    def _end_context(self, pid: int) -> None:
        ps = self.persons[pid]
        ctx = ps.context
        if ctx is None:
            return
        for oid in ctx.reservations | ctx.holds:
            self.occupancy.release(oid, pid)
        a = ps.agent
        if a is not None:
            if a.state == INTERACTING:
                a.state = IDLE
                a.object_id = None
            if a.walk is not None and a.walk.purpose == "dyn":
                self._stop_walk(pid)
        ps.context = None

    def _run_context(self, pid: int) -> None:
        ps = self.persons[pid]
        ctx = ps.context
        try:
            while ctx.frames:
                if len(ctx.frames) > self.config.max_rule_depth:
                    raise EvalError(f"rule calls nested deeper than {self.config.max_rule_depth}")
                fr = ctx.frames[-1]
                if fr.index >= len(fr.items):
                    ctx.frames.pop()
                    continue
                item = fr.items[fr.index]
                fr.index += 1
                if isinstance(item, ast.CaseChain):
                    body = item.otherwise
                    for cond, b in item.branches:
                        if truthy(evaluate(cond, fr.env), item.pos):
                            body = b
                            break
                    if body:
                        ctx.frames.append(Frame(body, fr.env))
                elif isinstance(item, ast.Placeholder):
                    continue
                elif isinstance(item, ast.Group):
                    ctx.frames.append(Frame(ast.compiled(item.items), fr.env.clone()))
                elif isinstance(item, ast.RuleCall):
                    rule = self.rules.get(item.name)
                    if rule is None:
                        raise EvalError(f"unknown rule {item.name!r}", item.pos)
                    args = [evaluate(a, fr.env) for a in item.args]
                    if len(args) != len(rule.params):
                        raise EvalError(f"rule {item.name} takes {len(rule.params)} argument(s), got {len(args)}",
                                        item.pos)
                    env = fr.env.clone()
                    env.variables.update(zip(rule.params, args))
                    ctx.frames.append(Frame(ast.compiled(rule.successor), env))
                elif isinstance(item, ast.OpCall):
                    if self._dynamic_op(pid, ctx, fr, item):
                        return
                    if ps.context is not ctx:
                        return
                else:
                    raise EvalError(f"unexpected item {type(item).__name__}")
        except RuleError as exc:
            self.incident(pid, f"rule {ctx.rule.name} stopped: {exc}")
        if ps.context is ctx:
            self._end_context(pid)
            if ctx.floating:
                self._schedule_floating(pid)

    def _block_until_arrival(self, pid: int, ctx: ExecutionContext, walk: Optional[Walk], what: str) -> bool:
        if walk is None:
            raise EvalError(f"{what}: no path")
        if walk.arrival_tick <= self.tick:
            self._on_arrival_inline(pid, walk)
            return False
        ctx.blocking = ("walk", walk)
        return True

    def _on_arrival_inline(self, pid: int, walk: Walk) -> None:
        ps = self.persons[pid]
        a = ps.agent
        a.position = tuple(float(v) for v in walk.path.polyline[-1])
        a.walk = None
        if a.state == WALKING:
            a.state = IDLE
        if walk.target is not None:
            self._set_inside(pid, walk.target)

    def _dynamic_op(self, pid: int, ctx: ExecutionContext, fr: Frame, op: ast.OpCall) -> bool:
        """Run one operation inside a delayed rule; True when execution must pause."""
        name, args, env = op.name, op.args, fr.env
        ps = self.persons[pid]
        if name == "set":
            if len(args) != 2 or not isinstance(args[0], ast.Var):
                raise EvalError("set() needs a variable name and a value", op.pos)
            env.variables[args[0].name] = evaluate(args[1], env)
            return False
        if name in AGENDA_OPS or name == "members":
            log.debug("person %d: %s() ignored while a delayed rule runs", pid, name)
            return False
        if name == "wait":
            _arity(op, 1, 1)
            s = as_number(evaluate(args[0], env), "wait duration", op.pos)
            n = int(math.ceil(s / self.dt - EPS)) if s > 0 else 0
            if n <= 0:
                return False
            ctx.token += 1
            ctx.blocking = ("wait", self.tick + n)
            self._schedule(self.tick + n, "wake", pid, (ctx, ctx.token))
            return True
        if name == "goToZone":
            _arity(op, 1, 1)
            kind = as_text(evaluate(args[0], env), "zone type", op.pos)
            key = self._nearest_zone_entry(pid, kind)
            if key is None:
                raise EvalError(f"goToZone: no reachable zone of type {kind!r}", op.pos)
            return self._block_until_arrival(pid, ctx, self._start_walk(pid, key, "dyn"), "goToZone")
        if name == "goToObject":
            _arity(op, 1, 1)
            v = evaluate(args[0], env)
            if v is INVALID:
                raise EvalError("goToObject: invalid object", op.pos)
            oid = as_entity(v, "object", "goToObject argument", op.pos).id
            return self._block_until_arrival(pid, ctx, self._start_walk(pid, ("object", oid), "dyn"), "goToObject")
        if name == "enterBuilding":
            _arity(op, 1, 1)
            v = evaluate(args[0], env)
            if v is INVALID:
                raise EvalError("enterBuilding: invalid building", op.pos)
            b = as_entity(v, "building", "enterBuilding argument", op.pos).id
            if ps.inside == b:
                return False
            walk = self._start_walk(pid, ("entrance", b, 0), "dyn", b)
            return self._block_until_arrival(pid, ctx, walk, "enterBuilding")
        if name == "interact":
            _arity(op, 1, 2)
            v = evaluate(args[0], env)
            if len(args) > 1:
                as_text(evaluate(args[1], env), "interaction verb", op.pos)
            if v is INVALID:
                return False
            oid = as_entity(v, "object", "interact argument", op.pos).id
            a = ps.agent
            if a is None:
                self.incident(pid, f"interact with object {oid} from inside a building; ignored")
                return False
            pos = self.position_of(pid)
            ox, oy = self.object_pos[oid]
            if math.hypot(pos[0] - ox, pos[1] - oy) > self.config.interaction_range + EPS:
                self.incident(pid, f"object {oid} out of reach; interact ignored")
                return False
            if self.occupancy.hold(oid, pid):
                ctx.reservations.discard(oid)
                ctx.holds.add(oid)
                a.state = INTERACTING
                a.object_id = oid
                self.interactions.append((self.tick, pid, oid))
            return False
        if name == "waitUntilNextTask":
            _arity(op, 0, 0)
            ctx.blocking = ("end",)
            return True
        raise EvalError(f"unknown operation {name!r}", op.pos)

    def _nearest_zone_entry(self, pid: int, kind: str):
        src = self._location(pid)
        best, bd = None, math.inf
        for z in self.city.zones:
            if z.type != kind:
                continue
            for k in range(len(z.entry_points)):
                key = ("zone", z.id, k)
                if key not in self.nav.attachments:
                    continue
                d = self.nav.distance(src, key)
                if d is not INVALID and d < bd - EPS:
                    best, bd = key, d
        return best

    # -- floating tasks -----------------------------------------------------------------------
    def _schedule_floating(self, pid: int) -> None:
        ps = self.persons[pid]
        slot = ps.slot
        tasks = self.agendas.agendas[pid].tasks
        if slot is None or ps.task_index < 0 or tasks[ps.task_index] is not slot:
            return
        while ps.context is None:
            remaining = slot.t1 - self.time
            if remaining <= EPS:
                return
            fits = [k for k, e in enumerate(ps.pool) if e.max_duration <= remaining + EPS]
            if not fits:
                return  # nothing fits: stay where we are
            top = max(ps.pool[k].priority for k in fits)
            tied = [k for k in fits if ps.pool[k].priority == top]
            k = tied[int(self.rngs[pid].integers(len(tied)))] if len(tied) > 1 else tied[0]
            entry = ps.pool.pop(k)
            end = self.time + min(entry.max_duration, remaining)
            bound = None if end >= slot.t1 - EPS else self.tick_of(end)
            self._start_context(pid, entry.rule, entry.bindings, bound, True)
            # a context that ran to completion already rescheduled; stop if one is live
            return

    # -- observation --------------------------------------------------------------------------
    def view(self, pid: int) -> PersonView:
        ps = self.persons[pid]
        tasks = self.agendas.agendas[pid].tasks
        kind = tasks[ps.task_index].kind if 0 <= ps.task_index < len(tasks) else ""
        if ps.inside is not None:
            return PersonView(pid, ps.inside, None, "inside", ps.task_index, kind)
        a = ps.agent
        st = WALKING if a.walk is not None and a.state == IDLE else a.state
        return PersonView(pid, None, self.position_of(pid), st, ps.task_index, kind)

    def snapshot(self) -> list:
        return [self.view(ps.pid) for ps in self.persons]

    def embodied(self) -> list:
        return [ps.pid for ps in self.persons if ps.agent is not None]

    def transit(self, pid: int) -> Optional[tuple]:
        """(path, distance travelled) for a person on a movement trip, else None."""
        a = self.persons[pid].agent
        if a is None or a.walk is None:
            return None
        return a.walk.path, a.walk.distance_at_time(self.time)

    def agent_positions(self) -> tuple[np.ndarray, np.ndarray, list, list]:
        pids = self.embodied()
        xy = np.zeros((len(pids), 2))
        walkers = []
        for n, pid in enumerate(pids):
            a = self.persons[pid].agent
            if a.walk is None:
                xy[n] = a.position
            else:
                walkers.append(n)
        if walkers:
            paths = [self.persons[pids[n]].agent.walk for n in walkers]
            counts = np.array([len(w.path.polyline) for w in paths], dtype=np.int64)
            starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
            points = np.concatenate([w.path.polyline for w in paths])
            cum = np.concatenate([w.path.cumulative for w in paths])
            dist = np.array([w.distance_at_time(self.time) for w in paths])
            xy[walkers] = positions_along(points, cum, starts, counts, dist)
        states, kinds = [], []
        for pid in pids:
            ps = self.persons[pid]
            a = ps.agent
            states.append(WALKING if a.walk is not None and a.state == IDLE else a.state)
            tasks = self.agendas.agendas[pid].tasks
            kinds.append(tasks[ps.task_index].kind if 0 <= ps.task_index < len(tasks) else "")
        return np.array(pids, dtype=np.int64), xy, states, kinds

    def _sample(self) -> None:
        if not self.samplers:
            return
        pids, xy, states, kinds = self.agent_positions()
        for fn in self.samplers:
            fn(self.tick, self.time, pids, xy, states, kinds)


def _arity(op: ast.OpCall, lo: int, hi: int) -> None:
    if not lo <= len(op.args) <= hi:
        want = str(lo) if lo == hi else f"{lo}..{hi}"
        raise EvalError(f"{op.name}() takes {want} argument(s), got {len(op.args)}", op.pos)


def simulate_day(city, nav, population, agendas, seed: int = 0, config: Optional[SimConfig] = None,
                 t_from: float = 0.0, t_to: float = DAY, samplers=(), jump_to: Optional[float] = None) -> Simulation:
    sim = Simulation(city, nav, population, agendas, seed, config)
    sim.samplers.extend(samplers)
    sim.initialize(t_from)
    if jump_to is not None:
        if jump_to <= t_from:
            raise SimulationError("jump target must be after the start time")
        sim.time_jump(jump_to - t_from)
    sim.run_until(t_to)
    return sim
