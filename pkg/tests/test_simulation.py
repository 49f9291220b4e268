import math
import os

import numpy as np
import pytest
from conftest import households_population

from crowdforge.agendagen import DAY, GOTO, GROUP, STAY, generate_all_agendas
from crowdforge.citygen import LayoutConfig, generate_city
from crowdforge.errors import SimulationError
from crowdforge.harness.pipeline import data_path
from crowdforge.navgraph import build_navgraph
from crowdforge.rulelang import load_rules, resolve_source
from crowdforge.simulation import OccupancyTable, SimConfig, Simulation, exits_without_entry

HERE = os.path.dirname(__file__)


def make_sim(world, src, households, seed=0, dt=0.25, sample_interval=60.0):
    city, nav = world
    pop = households_population(city, households)
    rules = resolve_source(src) if isinstance(src, str) else src
    ag = generate_all_agendas(rules, pop, city, nav, seed)
    return Simulation(city, nav, pop, ag, seed, SimConfig(dt=dt, sample_interval=sample_interval))


@pytest.fixture(scope="module")
def bench_world():
    city = generate_city(load_rules(os.path.join(HERE, "data", "bench_city.cga")),
                         LayoutConfig(blocksX=1, blocksY=1, lotsPerBlockX=2, lotsPerBlockY=1), 0)
    return city, build_navgraph(city)


def test_bench_world_shape(bench_world):
    city, _ = bench_world
    assert len(city.buildings_of_type("house")) == 1
    assert len(city.zones_of_type("park")) == 1
    assert [o.type for o in city.objects] == ["bench"]


def test_wait_lasts_whole_ticks(structured):
    src = ("@StartRule\nTop --> members { true: delayedRule(8h, 12h, Later) }\n"
           "Later --> wait(2) enterBuilding(findNearestBuilding(\"shop\", home))\n")
    sim = make_sim(structured, src, [[40]], dt=0.3)
    sim.run_until(9 * 3600)
    (exit_ev,) = [e for e in sim.events if e.kind == "exit"]
    assert exit_ev.tick == sim.tick_of(8 * 3600) + math.ceil(2 / 0.3)


def test_group_members_share_one_position(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40, 7, 9]])
    (grp,) = [t for t in sim.agendas.agendas[0].tasks if t.kind == GROUP]
    sim.initialize(0.0)
    sim.run_until(grp.t0 - 60)
    together = 0
    t = sim.time
    while t < grp.t1 + 600:
        t += 1.0
        sim.run_until(t)
        views = [sim.view(p) for p in (0, 1, 2)]
        if all(v.state == "grouped" for v in views):
            together += 1
            assert views[0].position == views[1].position == views[2].position
    assert together > 0
    assert all(sim.persons[p].inside == grp.building for p in (1, 2))


def test_floating_pool_runs_by_priority(structured):
    src = ("@StartRule\nTop --> members { true: floatingSlot(17h, 18.5h) floatingTask(1h, Work, 1) "
           "floatingTask(1h, Shop, 2) }\n"
           "Shop --> enterBuilding(findNearestBuilding(\"shop\", home)) waitUntilNextTask()\n"
           "Work --> enterBuilding(findNearestBuilding(\"workplace\", home)) waitUntilNextTask()\n")
    city, _ = structured
    sim = make_sim(structured, src, [[40]])
    sim.run_until(DAY - 1)
    entered = [city.buildings[e.building].types for e in sim.events if e.kind == "enter"]
    assert ["shop"] in entered
    assert ["workplace"] not in entered
    assert [e.rule for e in sim.persons[0].pool] == ["Work"]


def test_pool_task_longer_than_slot_does_nothing(structured):
    src = ("@StartRule\nTop --> members { true: floatingSlot(17h, 17.5h) floatingTask(1h, Shop) }\n"
           "Shop --> enterBuilding(findNearestBuilding(\"shop\", home))\n")
    sim = make_sim(structured, src, [[40]])
    sim.run_until(DAY - 1)
    assert [e.kind for e in sim.events] == ["init"]
    assert len(sim.persons[0].pool) == 1


def test_bench_is_held_then_released(bench_world):
    src = ("@StartRule\nTop --> members { true: delayedRule(10h, 11h, Sit) }\n"
           "Sit --> set(b, findObject(\"bench\")) goToObject(b) interact(b, \"sit\") waitUntilNextTask()\n")
    sim = make_sim(bench_world, src, [[40]])
    oid = sim.city.objects[0].id
    sim.run_until(10.5 * 3600)
    assert sim.view(0).state == "interacting"
    assert sim.occupancy.used(oid) == 1
    sim.run_until(11 * 3600 + 1)
    assert sim.occupancy.used(oid) == 0
    sim.run_until(12 * 3600)
    assert sim.persons[0].inside == sim.population.persons[0].home


def test_bench_capacity_admits_one(bench_world):
    src = ("@StartRule\nTop --> members { true: delayedRule(10h, 11h, Sit) }\n"
           "Sit --> set(b, findObject(\"bench\")) goToObject(b) interact(b) waitUntilNextTask()\n")
    sim = make_sim(bench_world, src, [[40, 41, 42]])
    sim.run_until(10.5 * 3600)
    states = sorted(sim.view(p).state for p in range(3))
    assert states.count("interacting") == 1
    sim.occupancy.check()


def test_occupancy_table():
    occ = OccupancyTable({0: 1})
    assert occ.reserve(0, 5)
    assert not occ.available(0, 6)
    assert occ.available(0, 5)
    assert not occ.hold(0, 6)
    assert occ.hold(0, 5)
    assert occ.used(0) == 1
    occ.release(0, 5)
    assert occ.used(0) == 0 and occ.hold(0, 6)


def test_full_day_jump_returns_to_same_state(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40, 7], [70], [30, 33, 12]])
    t = 8 * 3600 - 30.0
    sim.initialize(t)
    before = sim.snapshot()
    sim.time_jump(DAY)
    assert sim.time == t
    assert sim.snapshot() == before


def test_jump_must_move_forward(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40]])
    sim.initialize(0.0)
    with pytest.raises(SimulationError):
        sim.time_jump(0.0)
    sim.run_until(100.0)
    with pytest.raises(SimulationError):
        sim.run_until(50.0)


def test_initialize_places_people_from_agendas(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40], [35]])
    for pid in (0, 1):
        tasks = sim.agendas.agendas[pid].tasks
        (stay,) = [t for t in tasks if t.kind == STAY and t.building != sim.population.persons[pid].home]
        sim.initialize((stay.t0 + stay.t1) / 2 // 0.25 * 0.25)
        assert sim.view(pid).state == "inside" and sim.persons[pid].inside == stay.building
        i = next(k for k, t in enumerate(tasks) if t.kind == GOTO and tasks[k - 1].kind == STAY)
        go = tasks[i]
        t = (go.t0 + go.t1) / 2 // 0.25 * 0.25
        sim.initialize(t)
        path, travelled = sim.transit(pid)
        frac = (t - go.t0) / (go.t1 - go.t0)
        assert travelled == pytest.approx(frac * path.total_length)
        assert abs(travelled - path.total_length / 2) <= 0.25 * sim.population.persons[pid].walk_speed + 1e-9
        assert sim.persons[pid].inside is None


def test_homebodies_produce_no_samples(structured):
    src = "@StartRule\nTop --> members { age > 200: stayInside(1h, 2h, home) }\n"
    sim = make_sim(structured, src, [[40, 7], [70]])
    rows = []
    sim.samplers.append(lambda tick, time, pids, xy, states, kinds: rows.append(len(pids)))
    sim.run_until(DAY)
    assert len(rows) == DAY // 60 and sum(rows) == 0
    assert all(e.kind == "init" for e in sim.events)


def test_agenda_day_is_coherent(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40, 38, 7, 9], [70, 68], [25], [45, 12]])
    sim.run_until(DAY - 0.25)
    assert exits_without_entry(sim.events) == []
    for p in sim.population.persons:
        assert sim.persons[p.id].inside == p.home


def test_samples_follow_interval(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40, 7]], sample_interval=30.0)
    ticks = []
    sim.samplers.append(lambda tick, time, pids, xy, states, kinds: ticks.append(tick))
    sim.run_until(3600)
    assert ticks == list(range(0, 3600 * 4, 120))


def test_sampled_positions_match_walk(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40, 7], [35]])
    seen = []

    def check(tick, time, pids, xy, states, kinds):
        for n, pid in enumerate(pids):
            seen.append(pid)
            assert np.allclose(xy[n], sim.position_of(int(pid)))
    sim.samplers.append(check)
    sim.run_until(DAY - 1)
    assert seen


def test_config_validation():
    with pytest.raises(SimulationError):
        SimConfig(dt=0).validate()
    with pytest.raises(SimulationError):
        SimConfig(sample_interval=-1).validate()


def test_conservation_and_speed_bound_every_tick(structured):
    sim = make_sim(structured, load_rules(data_path("weekday.pcg")), [[40, 7, 9], [35], [70, 68]],
                   sample_interval=0.25)
    speed = {p.id: p.walk_speed for p in sim.population.persons}
    prev = {}
    steps = 0

    def check(tick, time, pids, xy, states, kinds):
        nonlocal prev, steps
        embodied = set(int(p) for p in pids)
        for ps in sim.persons:
            assert (ps.inside is not None) != (ps.pid in embodied)
        cur = {int(p): xy[n] for n, p in enumerate(pids)}
        for p, pos in cur.items():
            if p in prev:
                steps += 1
                assert np.hypot(*(pos - prev[p])) <= speed[p] * sim.dt + 1e-6
        prev = cur
    sim.samplers.append(check)
    sim.initialize(7.9 * 3600)
    sim.run_until(8.2 * 3600)
    sim.run_until(15.9 * 3600)
    prev = {}
    sim.run_until(16.2 * 3600)
    assert steps > 0
