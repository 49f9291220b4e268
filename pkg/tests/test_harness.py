import json

import numpy as np
import pytest

from crowdforge.agendagen import STAY
from crowdforge.errors import InputError
from crowdforge.harness import (HeatmapGrid, RunConfig, age_mask, filter_by_age, heatmap_from_records, inspect_person,
                                make_agendas, random_walk_events, read_pgm, read_trajectories, run_pipeline,
                                run_simulation)
from crowdforge.harness.pipeline import data_path
from crowdforge.simulation import SimConfig, exits_without_entry


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return run_pipeline(RunConfig(out_dir=str(out), seed=3, persons=150))


def test_pipeline_writes_every_artifact(run):
    for key in ("city", "population", "agendas", "heatmap_pgm", "heatmap_csv", "trajectories", "events",
                "incidents"):
        with open(run.files[key], "rb") as fh:
            assert fh.read(1)
    with open(run.files["trajectories"]) as fh:
        header, _ = read_trajectories(fh)
    assert header["seed"] == 3 and header["tool"] == "crowdforge"
    assert set(header["inputs"]) == {"city.json", "population.json", "agendas.json"}


def test_heatmap_conserves_trajectory_samples(run):
    with open(run.files["trajectories"]) as fh:
        _, records = read_trajectories(fh)
    assert run.heatmap.total + run.heatmap.outside == len(records) > 0
    assert run.heatmap.outside == 0


def test_heatmap_cells_match_floor_oracle(run):
    city, nav, pop, ag = run.city, run.nav, run.population, run.agendas
    raw = []
    _, grid = run_simulation(city, nav, pop, ag, 3, SimConfig(), 6 * 3600, 10 * 3600)
    sim2, _ = run_simulation(city, nav, pop, ag, 3, SimConfig(), 6 * 3600, 6 * 3600)
    sim2.samplers.append(lambda tick, time, pids, xy, states, kinds: raw.append(xy.copy()))
    sim2.run_until(10 * 3600)
    xy = np.concatenate(raw)
    expected = np.zeros_like(grid.counts)
    for x, y in xy:
        expected[int(np.floor(y / grid.cell_size)), int(np.floor(x / grid.cell_size))] += 1
    assert (grid.counts == expected).all()


def test_pgm_and_csv_exports(run):
    with open(run.files["heatmap_pgm"], "rb") as fh:
        img = read_pgm(fh.read())
    counts = run.heatmap.counts
    assert img.shape == counts.shape
    assert img.max() == 65535
    scaled = np.rint(counts * (65535.0 / counts.max())).astype(int)
    assert (img[::-1].astype(int) == scaled).all()
    with open(run.files["heatmap_csv"]) as fh:
        lines = [l for l in fh.read().splitlines() if not l.startswith("#")]
    assert lines[0] == "row,col,count"
    back = np.zeros_like(counts)
    for l in lines[1:]:
        r, c, n = map(int, l.split(","))
        back[r, c] = n
    assert (back == counts).all()


def test_empty_grid_exports():
    g = HeatmapGrid.empty((0, 0), 3, 2, 1.0)
    assert read_pgm(g.pgm_bytes()).max() == 0
    assert g.csv_text() == "row,col,count\n"
    with pytest.raises(InputError):
        HeatmapGrid.empty((0, 0), 3, 2, 0.0)


def test_age_bands_partition_the_heatmap(run):
    city, nav, pop, ag = run.city, run.nav, run.population, run.agendas
    bands = [(0, 18), (18, 65), (65, 200)]
    parts = [run_simulation(city, nav, pop, ag, 3, age_band=b)[1] for b in bands]
    total = sum(p.counts for p in parts)
    assert (total == run.heatmap.counts).all()
    masks = [age_mask(pop, *b) for b in bands]
    assert (sum(m.astype(int) for m in masks) == 1).all()
    with open(run.files["trajectories"]) as fh:
        _, records = read_trajectories(fh)
    for b, part in zip(bands, parts):
        sub = filter_by_age(records, pop, *b)
        assert heatmap_from_records(sub, HeatmapGrid.for_city(city)).total == part.total


def test_inspect_report(run):
    text = inspect_person(run.population, run.agendas, 0, run.city)
    assert text.startswith("person 0\n")
    assert "agenda:" in text and "floating pool:" in text
    assert len([l for l in text.splitlines() if l.startswith("  ") and "-" in l]) >= len(run.agendas.agendas[0].tasks)
    with pytest.raises(InputError):
        inspect_person(run.population, run.agendas, 10 ** 6)


def test_agenda_run_is_coherent_but_baseline_is_not(run):
    assert exits_without_entry(run.simulation.events) == []
    base = random_walk_events(run.city, run.nav, len(run.population.persons), 3)
    assert len(exits_without_entry(base)) > 0


def test_missing_stage_output_is_reported(tmp_path):
    with pytest.raises(InputError, match="missing"):
        run_pipeline(RunConfig(out_dir=str(tmp_path), start_stage="agendas"))
    with pytest.raises(InputError):
        run_pipeline(RunConfig(out_dir=str(tmp_path), start_stage="nope"))


def test_resume_from_simulate_stage_reproduces_outputs(run):
    again = run_pipeline(RunConfig(out_dir=run.files["city"].rsplit("/", 1)[0], seed=3, start_stage="simulate"))
    assert (again.heatmap.counts == run.heatmap.counts).all()


def test_work_start_define_shifts_work_by_an_hour(run):
    city, nav, pop = run.city, run.nav, run.population
    base = make_agendas(city, nav, pop, data_path("weekday.pcg"), 3)
    later = make_agendas(city, nav, pop, data_path("weekday.pcg"), 3, {"workStart": "9h"})
    shifted = 0
    for a, b in zip(base.agendas, later.agendas):
        wa = [t for t in a.tasks if t.kind == STAY and city.buildings[t.building].has_type("workplace")]
        wb = [t for t in b.tasks if t.kind == STAY and city.buildings[t.building].has_type("workplace")]
        assert len(wa) == len(wb)
        grouped = any(t.group is not None for t in a.tasks)
        for x, y in zip(wa, wb):
            if not grouped:
                assert y.t0 - x.t0 == pytest.approx(3600.0)
                shifted += 1
    assert shifted > 0
    assert json.loads(later.dumps())["meta"]["defines"] == {"workStart": "9h"}


def test_hand_edited_city_feeds_later_stages(tmp_path):
    first = run_pipeline(RunConfig(out_dir=str(tmp_path), seed=1, persons=60, t_to=3600.0))
    with open(first.files["city"]) as fh:
        doc = json.load(fh)
    x, y = doc["objects"][0]["position"]
    doc["objects"][0]["position"] = [x + 1.0, y]
    with open(first.files["city"], "w") as fh:
        json.dump(doc, fh)
    again = run_pipeline(RunConfig(out_dir=str(tmp_path), seed=1, persons=60, t_to=3600.0,
                                   start_stage="population"))
    assert again.city.objects[0].position[0] == pytest.approx(x + 1.0)
    assert len(again.population.persons) == 60
