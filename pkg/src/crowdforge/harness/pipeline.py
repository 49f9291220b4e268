"""City -> population -> agendas -> simulation, each stage saved and reloadable."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from .. import __version__
from ..agendagen.generator import generate_all_agendas
from ..agendagen.model import DAY, AgendaSet
from ..citygen.city import SemanticCity, generate_city
from ..citygen.layout import LayoutConfig, read_layout
from ..errors import InputError
from ..navgraph import NavGraph, build_navgraph
from ..population import Population, generate_population, load_patterns
from ..rulelang.resolve import load_rules
from ..simulation.engine import SimConfig, Simulation
from ..simulation.records import TrajectoryWriter
from .heatmap import HeatmapGrid

log = logging.getLogger(__name__)

STAGES = ("city", "population", "agendas", "simulate")
ARTIFACTS = {"city": "city.json", "population": "population.json", "agendas": "agendas.json"}


def data_path(name: str) -> str:
    """Path of a file shipped in the package data directory."""
    return str(resources.files("crowdforge").joinpath("data", name))


def digest_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def artifact_meta(seed: int, inputs: dict) -> dict:
    """Header embedded in every output: seed, tool version, input digests keyed by file name."""
    return {"tool": "crowdforge", "version": __version__, "seed": int(seed), "inputs": dict(sorted(inputs.items()))}


def _inputs(*paths: str) -> dict:
    return {os.path.basename(p): digest_file(p) for p in paths if p}


# -- stages ------------------------------------------------------------------------------------


def make_city(rules_path: str, layout_path: Optional[str], seed: int, defines: Optional[dict] = None,
              layout_overrides: Optional[dict] = None) -> SemanticCity:
    rules = load_rules(rules_path, defines=defines or {})
    config = read_layout(layout_path, layout_overrides) if layout_path else LayoutConfig(**(layout_overrides or {}))
    config.validate()
    meta = artifact_meta(seed, _inputs(rules_path, layout_path))
    if defines:
        meta["defines"] = dict(sorted(defines.items()))
    return generate_city(rules, config, seed, meta=meta)


def make_population(city: SemanticCity, city_path: Optional[str], patterns_path: str, seed: int,
                    households: Optional[int] = None, persons: Optional[int] = None) -> Population:
    if households is None and persons is None:
        raise InputError("give a household count or a person count")
    patterns = load_patterns(patterns_path)
    meta = artifact_meta(seed, _inputs(city_path, patterns_path))
    return generate_population(city, patterns, households, seed, target_persons=persons, meta=meta)


def make_agendas(city: SemanticCity, nav: NavGraph, population: Population, rules_path: str, seed: int,
                 defines: Optional[dict] = None, input_paths: tuple = ()) -> AgendaSet:
    rules = load_rules(rules_path, defines=defines or {})
    meta = artifact_meta(seed, _inputs(rules_path, *input_paths))
    if defines:
        meta["defines"] = dict(sorted(defines.items()))
    return generate_all_agendas(rules, population, city, nav, seed, meta=meta)


@dataclass
class SimOutputs:
    heatmap_pgm: Optional[str] = None
    heatmap_csv: Optional[str] = None
    trajectories: Optional[str] = None
    events: Optional[str] = None
    incidents: Optional[str] = None


def run_simulation(city: SemanticCity, nav: NavGraph, population: Population, agendas: AgendaSet, seed: int,
                   config: Optional[SimConfig] = None, t_from: float = 0.0, t_to: float = DAY,
                   jump_to: Optional[float] = None, outputs: Optional[SimOutputs] = None, cell_size: float = 2.0,
                   header: Optional[dict] = None, age_band: Optional[tuple] = None):
    """Simulate and write the requested outputs; returns (simulation, heat-map grid)."""
    outputs = outputs or SimOutputs()
    header = header if header is not None else artifact_meta(seed, {})
    sim = Simulation(city, nav, population, agendas, seed, config)
    grid = HeatmapGrid.for_city(city, cell_size)
    keep = None
    if age_band is not None:
        keep = np.array([age_band[0] <= p.age < age_band[1] for p in population.persons], dtype=bool)
    sim.samplers.append(grid.sampler(keep))
    fh = None
    try:
        if outputs.trajectories:
            fh = open(outputs.trajectories, "w", encoding="utf-8")
            writer = TrajectoryWriter(fh, header)

            def write(tick, time, pids, xy, states, kinds):
                if keep is not None:
                    m = keep[pids]
                    pids, xy = pids[m], xy[m]
                    states = [s for s, k in zip(states, m) if k]
                    kinds = [s for s, k in zip(kinds, m) if k]
                writer.write(tick, time, pids, xy[:, 0], xy[:, 1], states, kinds)
            sim.samplers.append(write)
        sim.initialize(t_from)
        if jump_to is not None:
            if jump_to <= t_from:
                raise InputError("--jump-to must be later than --from")
            sim.run_until(t_from)
            sim.time_jump(jump_to - t_from)
        if t_to < sim.time:
            raise InputError("--to must not be earlier than the start (or jump) time")
        sim.run_until(t_to)
    finally:
        if fh is not None:
            fh.close()
    if outputs.heatmap_pgm:
        grid.save_pgm(outputs.heatmap_pgm, header)
    if outputs.heatmap_csv:
        grid.save_csv(outputs.heatmap_csv, header)
    if outputs.events:
        with open(outputs.events, "w", encoding="utf-8") as ev:
            ev.write(json.dumps({"header": header}, sort_keys=True) + "\n")
            for e in sim.events:
                ev.write(json.dumps(e.to_dict()) + "\n")
    if outputs.incidents:
        with open(outputs.incidents, "w", encoding="utf-8") as inc:
            inc.write("# " + json.dumps(header, sort_keys=True) + "\n")
            for line in sim.incidents:
                inc.write(line + "\n")
    return sim, grid


# -- full pipeline -----------------------------------------------------------------------------


@dataclass
class RunConfig:
    out_dir: str
    seed: int = 0
    city_rules: str = field(default_factory=lambda: data_path("structured_city.cga"))
    layout: Optional[str] = field(default_factory=lambda: data_path("structured.layout"))
    patterns: str = field(default_factory=lambda: data_path("patterns.csv"))
    agenda_rules: str = field(default_factory=lambda: data_path("weekday.pcg"))
    households: Optional[int] = None
    persons: Optional[int] = 600
    city_defines: dict = field(default_factory=dict)
    agenda_defines: dict = field(default_factory=dict)
    dt: float = 0.25
    sample_interval: float = 60.0
    cell_size: float = 2.0
    t_from: float = 0.0
    t_to: float = DAY
    jump_to: Optional[float] = None
    start_stage: str = "city"

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def validate(self) -> None:
        if self.start_stage not in STAGES:
            raise InputError(f"unknown stage {self.start_stage!r}; pick one of {', '.join(STAGES)}")
        for label, p in (("city rules", self.city_rules), ("layout", self.layout), ("patterns", self.patterns),
                         ("agenda rules", self.agenda_rules)):
            if p and not os.path.exists(p):
                raise InputError(f"{label} file not found: {p}")


@dataclass
class PipelineResult:
    city: SemanticCity
    nav: NavGraph
    population: Population
    agendas: AgendaSet
    simulation: Simulation
    heatmap: HeatmapGrid
    files: dict


def _load_stage(cfg: RunConfig, stage: str, loader):
    path = cfg.path(ARTIFACTS[stage])
    if not os.path.exists(path):
        raise InputError(f"stage '{stage}' output {path} is missing; rerun from an earlier stage")
    return loader(path)


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    start = STAGES.index(cfg.start_stage)
    files = {k: cfg.path(v) for k, v in ARTIFACTS.items()}

    if start <= 0:
        city = make_city(cfg.city_rules, cfg.layout, cfg.seed, cfg.city_defines)
        city.save(files["city"])
    else:
        city = _load_stage(cfg, "city", SemanticCity.load)
    nav = build_navgraph(city)
    nav.check_connected()

    if start <= 1:
        pop = make_population(city, files["city"], cfg.patterns, cfg.seed, cfg.households, cfg.persons)
        pop.save(files["population"])
    else:
        pop = _load_stage(cfg, "population", Population.load)

    if start <= 2:
        agendas = make_agendas(city, nav, pop, cfg.agenda_rules, cfg.seed, cfg.agenda_defines,
                               (files["city"], files["population"]))
        agendas.save(files["agendas"])
    else:
        agendas = _load_stage(cfg, "agendas", AgendaSet.load)

    header = artifact_meta(cfg.seed, _inputs(files["city"], files["population"], files["agendas"]))
    outputs = SimOutputs(cfg.path("heatmap.pgm"), cfg.path("heatmap.csv"), cfg.path("trajectories.jsonl"),
                         cfg.path("events.jsonl"), cfg.path("incidents.log"))
    files.update(heatmap_pgm=outputs.heatmap_pgm, heatmap_csv=outputs.heatmap_csv,
                 trajectories=outputs.trajectories, events=outputs.events, incidents=outputs.incidents)
    sim, grid = run_simulation(city, nav, pop, agendas, cfg.seed, SimConfig(cfg.dt, cfg.sample_interval),
                               cfg.t_from, cfg.t_to, cfg.jump_to, outputs, cfg.cell_size, header)
    return PipelineResult(city, nav, pop, agendas, sim, grid, files)
