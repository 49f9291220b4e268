"""Simulation bookkeeping: building events, incidents, occupancy, trajectory sink."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Optional

INIT, ENTER, EXIT = "init", "enter", "exit"


@dataclass(frozen=True)
class BuildingEvent:
    tick: int
    time: float
    person_id: int
    kind: str      # init | enter | exit
    building: int

    def to_dict(self) -> dict:
        return {"tick": self.tick, "time": self.time, "personId": self.person_id, "kind": self.kind,
                "building": self.building}


def exits_without_entry(events: list) -> list:
    """Exit events not preceded by an entry (or initial placement) into the same building."""
    inside: dict[int, Optional[int]] = {}
    bad = []
    for ev in events:
        if ev.kind in (INIT, ENTER):
            inside[ev.person_id] = ev.building
        elif ev.kind == EXIT:
            if inside.get(ev.person_id) != ev.building:
                bad.append(ev)
            inside[ev.person_id] = None
    return bad


class OccupancyTable:
    """Per-object holders and soft reservations, bounded by capacity."""

    def __init__(self, capacities: dict):
        self.capacity = dict(capacities)
        self.holders: dict[int, set] = {k: set() for k in self.capacity}
        self.soft: dict[int, set] = {k: set() for k in self.capacity}

    def used(self, oid: int) -> int:
        return len(self.holders[oid]) + len(self.soft[oid])

    def available(self, oid: int, pid: Optional[int]) -> bool:
        if pid is not None and (pid in self.holders[oid] or pid in self.soft[oid]):
            return True
        return self.used(oid) < self.capacity[oid]

    def reserve(self, oid: int, pid: int) -> bool:
        if pid in self.holders[oid] or pid in self.soft[oid]:
            return True
        if self.used(oid) >= self.capacity[oid]:
            return False
        self.soft[oid].add(pid)
        return True

    def hold(self, oid: int, pid: int) -> bool:
        if pid in self.holders[oid]:
            return True
        if pid in self.soft[oid]:
            self.soft[oid].discard(pid)
            self.holders[oid].add(pid)
            return True
        if self.used(oid) >= self.capacity[oid]:
            return False
        self.holders[oid].add(pid)
        return True

    def release(self, oid: int, pid: int) -> None:
        self.holders[oid].discard(pid)
        self.soft[oid].discard(pid)

    def reset(self) -> None:
        for k in self.capacity:
            self.holders[k].clear()
            self.soft[k].clear()

    def check(self) -> None:
        for k, cap in self.capacity.items():
            if self.used(k) > cap:
                raise AssertionError(f"object {k} over capacity: {self.used(k)} > {cap}")


class TrajectoryWriter:
    """JSON-lines trajectory stream, one record per embodied agent per sample."""

    def __init__(self, fh: IO[str], header: Optional[dict] = None):
        self.fh = fh
        self.records = 0
        if header is not None:
            fh.write(json.dumps({"header": header}, sort_keys=True) + "\n")

    def write(self, tick: int, time: float, pids, xs, ys, states, kinds) -> None:
        lines = []
        for pid, x, y, st, kd in zip(pids, xs, ys, states, kinds):
            lines.append(json.dumps({"tick": int(tick), "time": round(float(time), 6), "personId": int(pid),
                                     "x": round(float(x), 6), "y": round(float(y), 6), "state": st,
                                     "taskKind": kd}))
        if lines:
            self.fh.write("\n".join(lines) + "\n")
            self.records += len(lines)
