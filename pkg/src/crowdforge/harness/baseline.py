"""Random-walk crowd baseline without agendas.

Agents appear at a random building entrance, walk to another random
building and vanish into it, and then reappear at a fresh random entrance.
No one remembers which building a person went into, so the run logs
exits from buildings the person never entered. This is the incoherence
that agenda-driven runs avoid.
"""
from __future__ import annotations

import numpy as np

from ..citygen.city import SemanticCity
from ..navgraph import NavGraph
from ..rulelang.values import INVALID
from ..simulation.records import ENTER, EXIT, BuildingEvent

BASELINE_STREAM = 0xBA5E


def random_walk_events(city: SemanticCity, nav: NavGraph, n_persons: int, seed: int, duration: float = 86400.0,
                       speed: float = 1.4, dt: float = 0.25) -> list[BuildingEvent]:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), BASELINE_STREAM]))
    ids = [b.id for b in city.buildings if b.entrances]
    events = []
    if len(ids) < 2:
        return events
    for pid in range(n_persons):
        t = float(rng.uniform(0, 3600))
        while t < duration:
            a, b = rng.choice(ids, size=2, replace=False)
            d = nav.building_distance(int(a), int(b))
            if d is INVALID or not np.isfinite(d):
                t += 60.0
                continue
            tick = int(np.ceil(t / dt))
            events.append(BuildingEvent(tick, tick * dt, pid, EXIT, int(a)))
            t += d / speed
            if t >= duration:
                break
            tick = int(np.ceil(t / dt))
            events.append(BuildingEvent(tick, tick * dt, pid, ENTER, int(b)))
            t += float(rng.uniform(60, 3600))
    events.sort(key=lambda e: (e.tick, e.person_id))
    return events
