"""Agenda timelines and their JSON form."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

from ..errors import InputError
from ..rulelang.values import INVALID, EntityRef, is_number

DAY = 86400.0

STAY = "StayInside"
GOTO = "GoToBuilding"
DELAYED = "DelayedRule"
SLOT = "FloatingSlot"
GROUP = "GroupAccompany"
KINDS = (STAY, GOTO, DELAYED, SLOT, GROUP)
MOVEMENT_KINDS = (GOTO, GROUP)
ANCHORED_KINDS = (STAY, GOTO, GROUP)


@dataclass(frozen=True)
class AgendaTask:
    t0: float
    t1: float
    kind: str
    building: Optional[int] = None      # target of stay/go/group tasks
    rule: Optional[str] = None          # delayed rule name
    bindings: Optional[tuple] = None    # ((name, value), ...) captured by value
    leader: Optional[int] = None        # group leader (on leader and member tasks)
    members: tuple = ()                 # group members (leader task only)
    group: Optional[str] = None         # group id shared by leader and member tasks

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    def covers(self, t: float) -> bool:
        return self.t0 <= t < self.t1

    def to_dict(self) -> dict:
        d = {"t0": _r(self.t0), "t1": _r(self.t1), "kind": self.kind}
        if self.building is not None:
            d["building"] = self.building
        if self.rule is not None:
            d["rule"] = self.rule
            d["bindings"] = {k: encode_value(v) for k, v in (self.bindings or ())}
        if self.group is not None:
            d["group"] = self.group
            d["leader"] = self.leader
        if self.members:
            d["members"] = list(self.members)
        return d

    @staticmethod
    def from_dict(d: dict) -> "AgendaTask":
        kind = d["kind"]
        if kind not in KINDS:
            raise InputError(f"unknown task kind {kind!r}")
        bindings = None
        if "bindings" in d:
            bindings = tuple((k, decode_value(v)) for k, v in d["bindings"].items())
        return AgendaTask(float(d["t0"]), float(d["t1"]), kind, d.get("building"), d.get("rule"), bindings,
                          d.get("leader"), tuple(d.get("members", ())), d.get("group"))


@dataclass(frozen=True)
class FloatingTaskEntry:
    owner: int
    max_duration: float
    rule: str
    priority: float = 0.0
    bindings: tuple = ()

    def to_dict(self) -> dict:
        return {"maxDuration": _r(self.max_duration), "rule": self.rule, "priority": self.priority,
                "bindings": {k: encode_value(v) for k, v in self.bindings}}

    @staticmethod
    def from_dict(owner: int, d: dict) -> "FloatingTaskEntry":
        return FloatingTaskEntry(owner, float(d["maxDuration"]), d["rule"], float(d.get("priority", 0.0)),
                                 tuple((k, decode_value(v)) for k, v in d.get("bindings", {}).items()))


def _r(v: float) -> float:
    # full precision so that a reloaded agenda simulates exactly like the original
    v = float(v)
    return 0.0 if v == 0 else v


def encode_value(v):
    if v is INVALID:
        return {"invalid": True}
    if isinstance(v, EntityRef):
        return {"ref": v.kind, "id": v.id}
    if isinstance(v, bool) or isinstance(v, str):
        return v
    if is_number(v):
        return _r(v)
    raise TypeError(f"cannot serialize value {v!r}")


def decode_value(v):
    if isinstance(v, dict):
        if v.get("invalid"):
            return INVALID
        return EntityRef(v["ref"], int(v["id"]))
    if isinstance(v, (bool, str)):
        return v
    return float(v)


class Agenda:
    """A person's timeline; later insertions win over earlier ones."""

    def __init__(self, owner: int, tasks: Optional[list] = None):
        self.owner = owner
        self.tasks: list[AgendaTask] = list(tasks or [])

    def insert(self, task: AgendaTask) -> None:
        t0, t1 = task.t0, task.t1
        if not t1 > t0:
            raise ValueError(f"task needs t0 < t1, got [{t0}, {t1})")
        out = []
        for old in self.tasks:
            if old.t1 <= t0 or old.t0 >= t1:
                out.append(old)
                continue
            if old.t0 < t0:
                out.append(replace(old, t1=t0))
            if old.t1 > t1:
                out.append(replace(old, t0=t1))
        out.append(task)
        out.sort(key=lambda t: (t.t0, t.t1))
        self.tasks = out

    def at(self, t: float) -> Optional[AgendaTask]:
        for task in self.tasks:
            if task.covers(t):
                return task
        return None

    def index_at(self, t: float) -> int:
        """Index of the task covering ``t``, else of the next one, else the last."""
        for i, task in enumerate(self.tasks):
            if t < task.t1:
                return i
        return len(self.tasks) - 1

    def finalize(self, home: int) -> None:
        """Fill every gap in [0, DAY) with a stay-at-home task."""
        out = []
        cursor = 0.0
        for task in self.tasks:
            if task.t0 > cursor:
                out.append(AgendaTask(cursor, task.t0, STAY, home))
            out.append(task)
            cursor = max(cursor, task.t1)
        if cursor < DAY:
            out.append(AgendaTask(cursor, DAY, STAY, home))
        self.tasks = out

    def replace_task(self, i: int, task: AgendaTask) -> None:
        self.tasks[i] = task

    def check(self, gap_free: bool = True) -> None:
        prev = 0.0
        for i, t in enumerate(self.tasks):
            if not t.t1 > t.t0:
                raise ValueError(f"task {i} has empty span")
            if t.t0 < prev - 1e-9:
                raise ValueError(f"task {i} overlaps its predecessor")
            if gap_free and abs(t.t0 - prev) > 1e-9:
                raise ValueError(f"gap before task {i}")
            prev = t.t1
        if gap_free and abs(prev - DAY) > 1e-9:
            raise ValueError("agenda does not reach the end of the day")

    def to_list(self) -> list:
        return [t.to_dict() for t in self.tasks]


@dataclass
class AgendaSet:
    agendas: list          # Agenda per person id
    pools: list            # list[FloatingTaskEntry] per person id
    rules_source: str = ""
    seed: int = 0
    meta: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "meta": self.meta, "seed": self.seed,
            "persons": [{"id": a.owner, "tasks": a.to_list(), "floating": [f.to_dict() for f in pool]}
                        for a, pool in zip(self.agendas, self.pools)],
            "diagnostics": list(self.diagnostics),
            "rules": self.rules_source,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @staticmethod
    def from_dict(d: dict) -> "AgendaSet":
        try:
            agendas, pools = [], []
            for k, p in enumerate(d["persons"]):
                if int(p["id"]) != k:
                    raise InputError("agenda person ids must be dense and ordered 0..n-1")
                agendas.append(Agenda(k, [AgendaTask.from_dict(t) for t in p["tasks"]]))
                pools.append([FloatingTaskEntry.from_dict(k, f) for f in p.get("floating", [])])
            return AgendaSet(agendas, pools, d.get("rules", ""), int(d.get("seed", 0)), d.get("meta", {}),
                             list(d.get("diagnostics", [])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed agendas document: {exc!r}") from None

    @staticmethod
    def load(path: str) -> "AgendaSet":
        try:
            with open(path, encoding="utf-8") as fh:
                return AgendaSet.from_dict(json.load(fh))
        except OSError as exc:
            raise InputError(f"cannot read agendas {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})") from None
