"""Plain-text report of one person's record and agenda."""
from __future__ import annotations

from typing import Optional

from ..agendagen.model import DELAYED, GROUP, AgendaSet
from ..citygen.city import SemanticCity
from ..errors import InputError
from ..population import Population
from ..rulelang.values import show
from ..simulation.engine import fmt_time


def _building(bid: Optional[int], city: Optional[SemanticCity]) -> str:
    if bid is None:
        return "-"
    if city is not None and 0 <= bid < len(city.buildings):
        return f"building {bid} ({', '.join(city.buildings[bid].types) or 'untyped'})"
    return f"building {bid}"


def inspect_person(population: Population, agendas: AgendaSet, person_id: int,
                   city: Optional[SemanticCity] = None) -> str:
    if not 0 <= person_id < len(population.persons) or person_id >= len(agendas.agendas):
        raise InputError(f"unknown person id {person_id}")
    p = population.persons[person_id]
    hh = population.households[p.household_id]
    lines = [
        f"person {p.id}",
        f"  household   {hh.id} ({len(hh.member_ids)} members: {', '.join(map(str, hh.member_ids))})",
        f"  age         {p.age} ({p.band})",
        f"  gender      {'woman' if p.gender else 'man'}",
        f"  home        {_building(p.home, city)}",
        f"  walk speed  {p.walk_speed:.2f} m/s",
        "agenda:",
    ]
    for t in agendas.agendas[person_id].tasks:
        what = _building(t.building, city) if t.building is not None else ""
        if t.kind == DELAYED:
            what = f"rule {t.rule}"
        extra = ""
        if t.kind == GROUP:
            extra = f"  group {t.group} with persons {', '.join(map(str, t.members))}"
        elif t.group is not None:
            extra = f"  group {t.group} led by person {t.leader}"
        lines.append(f"  {fmt_time(t.t0)}-{fmt_time(t.t1)}  {t.kind:<15} {what}{extra}".rstrip())
    lines.append("floating pool:")
    pool = agendas.pools[person_id]
    if not pool:
        lines.append("  (empty)")
    for e in pool:
        lines.append(f"  rule {e.rule}  up to {show(e.max_duration)} s  priority {show(e.priority)}")
    return "\n".join(lines) + "\n"
