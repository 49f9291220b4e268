"""Command-line interface: ``crowdforge <command> ...``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional

from . import __version__
from .agendagen.model import DAY, AgendaSet
from .citygen.city import SemanticCity, write_obj
from .errors import CrowdforgeError, InputError
from .harness.inspect import inspect_person
from .harness.pipeline import (STAGES, RunConfig, SimOutputs, artifact_meta, data_path, digest_file, make_agendas,
                               make_city, make_population, run_pipeline, run_simulation)
from .navgraph import build_navgraph
from .population import Population
from .rulelang.errors import RuleError
from .rulelang.evaluator import Environment, as_number, evaluate
from .rulelang.parser import parse_expression
from .rulelang.resolve import load_rules, parse_define, undefined_rules
from .simulation.engine import SimConfig

EXIT_OK, EXIT_INPUT, EXIT_INCIDENTS = 0, 1, 2

log = logging.getLogger("crowdforge")


def parse_time(text: str) -> float:
    """Seconds from a time literal such as ``8h``, ``7h + 30m`` or ``90``."""
    try:
        return float(as_number(evaluate(parse_expression(text), Environment({})), "time"))
    except (RuleError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"bad time {text!r}: {exc}") from None


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("CROWDFORGE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"CROWDFORGE_SEED must be an integer, got {env!r}") from None


def _defines(items) -> dict:
    return dict(parse_define(i) for i in items or [])


def _over_threshold(count: int, limit: Optional[int]) -> bool:
    return limit is not None and count > limit


def cmd_check(args) -> int:
    rf = load_rules(args.rulefile, defines=_defines(args.define))
    print(f"{args.rulefile}: {len(rf.rules)} rules, {len(rf.attributes)} attributes, start rule {rf.start_rule}")
    missing = undefined_rules(rf)
    for name, callers in sorted(missing.items()):
        print(f"warning: rule {name} is used by {', '.join(callers)} but never defined")
    return EXIT_OK


def cmd_city(args) -> int:
    seed = _seed(args.seed)
    city = make_city(args.rules, args.layout, seed, _defines(args.define))
    city.save(args.output)
    if args.obj:
        write_obj(city, args.obj)
    nav = build_navgraph(city)
    nav.check_connected()
    if args.emit_navgraph:
        nav.save(args.emit_navgraph)
    for d in city.diagnostics:
        print(f"warning: {d}", file=sys.stderr)
    print(f"city: {len(city.buildings)} buildings, {len(city.zones)} zones, {len(city.objects)} objects "
          f"-> {args.output}")
    return EXIT_INCIDENTS if _over_threshold(len(city.diagnostics), args.max_incidents) else EXIT_OK


def cmd_population(args) -> int:
    seed = _seed(args.seed)
    city = SemanticCity.load(args.city)
    pop = make_population(city, args.city, args.patterns, seed, args.households, args.persons)
    pop.save(args.output)
    print(f"population: {len(pop.households)} households, {len(pop.persons)} persons -> {args.output}")
    return EXIT_OK


def cmd_agendas(args) -> int:
    seed = _seed(args.seed)
    city = SemanticCity.load(args.city)
    pop = Population.load(args.population)
    nav = build_navgraph(city)
    agendas = make_agendas(city, nav, pop, args.rules, seed, _defines(args.define), (args.city, args.population))
    agendas.save(args.output)
    for d in agendas.diagnostics:
        print(f"warning: {d}", file=sys.stderr)
    print(f"agendas: {len(agendas.agendas)} persons, {len(agendas.diagnostics)} diagnostics -> {args.output}")
    return EXIT_INCIDENTS if _over_threshold(len(agendas.diagnostics), args.max_incidents) else EXIT_OK


def cmd_simulate(args) -> int:
    seed = _seed(args.seed)
    city = SemanticCity.load(args.city)
    pop = Population.load(args.population)
    agendas = AgendaSet.load(args.agendas)
    nav = build_navgraph(city)
    header = artifact_meta(seed, {os.path.basename(p): digest_file(p) for p in (args.city, args.population, args.agendas)})
    band = tuple(args.age_band) if args.age_band else None
    outputs = SimOutputs(args.heatmap, args.heatmap_csv, args.trajectories, args.events, args.incidents)
    sim, grid = run_simulation(city, nav, pop, agendas, seed, SimConfig(args.dt, args.sample_interval),
                               args.t_from, args.t_to, args.jump_to, outputs, args.cell_size, header, band)
    print(f"simulated {len(pop.persons)} persons to {args.t_to:g} s: {grid.total} agent samples, "
          f"{len(sim.incidents)} incidents")
    return EXIT_INCIDENTS if _over_threshold(len(sim.incidents), args.max_incidents) else EXIT_OK


def cmd_inspect(args) -> int:
    pop = Population.load(args.population)
    agendas = AgendaSet.load(args.agendas)
    city = SemanticCity.load(args.city) if args.city else None
    sys.stdout.write(inspect_person(pop, agendas, args.person, city))
    return EXIT_OK


def cmd_run(args) -> int:
    seed = _seed(args.seed)
    cfg = RunConfig(out_dir=args.out, seed=seed, households=args.households,
                    persons=None if args.households is not None else args.persons,
                    city_defines=_defines(args.city_define), agenda_defines=_defines(args.define),
                    dt=args.dt, sample_interval=args.sample_interval, cell_size=args.cell_size,
                    t_from=args.t_from, t_to=args.t_to, jump_to=args.jump_to, start_stage=args.from_stage)
    for attr, val in (("city_rules", args.city_rules), ("layout", args.layout), ("patterns", args.patterns),
                      ("agenda_rules", args.rules)):
        if val is not None:
            setattr(cfg, attr, val)
    res = run_pipeline(cfg)
    issues = len(res.agendas.diagnostics) + len(res.simulation.incidents)
    print(f"run: {len(res.population.persons)} persons, {len(res.agendas.diagnostics)} agenda diagnostics, "
          f"{len(res.simulation.incidents)} simulation incidents -> {args.out}")
    return EXIT_INCIDENTS if _over_threshold(issues, args.max_incidents) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crowdforge", description="Procedural city, population and daily-routine "
                                "generation with an agenda-driven crowd simulation.")
    p.add_argument("--version", action="version", version=f"crowdforge {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def seed_arg(sp):
        sp.add_argument("--seed", type=int, default=None, help="random seed (default: $CROWDFORGE_SEED or 0)")

    def limit_arg(sp):
        sp.add_argument("--max-incidents", type=int, default=None,
                        help="exit with status 2 when more diagnostics/incidents than this occur")

    sp = sub.add_parser("check", help="parse and resolve a rule file")
    sp.add_argument("rulefile")
    sp.add_argument("--define", action="append", metavar="NAME=VALUE")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("city", help="generate a semantic city")
    sp.add_argument("--rules", default=data_path("structured_city.cga"))
    sp.add_argument("--layout", default=None, help="layout file (default: built-in defaults)")
    sp.add_argument("--define", action="append", metavar="NAME=VALUE")
    sp.add_argument("-o", "--output", default="city.json")
    sp.add_argument("--obj", help="also write the city mesh as OBJ")
    sp.add_argument("--emit-navgraph", metavar="PATH", help="also write the navigation graph as JSON")
    seed_arg(sp)
    limit_arg(sp)
    sp.set_defaults(func=cmd_city)

    sp = sub.add_parser("population", help="sample households and persons")
    sp.add_argument("--city", required=True)
    sp.add_argument("--patterns", default=data_path("patterns.csv"))
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--households", type=int)
    g.add_argument("--persons", type=int, help="draw households until exactly this many persons")
    sp.add_argument("-o", "--output", default="population.json")
    seed_arg(sp)
    sp.set_defaults(func=cmd_population)

    sp = sub.add_parser("agendas", help="generate daily agendas from a rule file")
    sp.add_argument("--city", required=True)
    sp.add_argument("--population", required=True)
    sp.add_argument("--rules", default=data_path("weekday.pcg"))
    sp.add_argument("--define", action="append", metavar="NAME=VALUE")
    sp.add_argument("-o", "--output", default="agendas.json")
    seed_arg(sp)
    limit_arg(sp)
    sp.set_defaults(func=cmd_agendas)

    def sim_args(sp):
        sp.add_argument("--from", dest="t_from", type=parse_time, default=0.0, help="start time (e.g. 6h)")
        sp.add_argument("--to", dest="t_to", type=parse_time, default=DAY, help="end time (default 24h)")
        sp.add_argument("--jump-to", type=parse_time, default=None, help="jump ahead to this time after starting")
        sp.add_argument("--dt", type=float, default=0.25)
        sp.add_argument("--sample-interval", type=float, default=60.0)
        sp.add_argument("--cell-size", type=float, default=2.0)

    sp = sub.add_parser("simulate", help="simulate a day")
    sp.add_argument("--city", required=True)
    sp.add_argument("--population", required=True)
    sp.add_argument("--agendas", required=True)
    sim_args(sp)
    sp.add_argument("--heatmap", help="16-bit PGM heat-map output")
    sp.add_argument("--heatmap-csv", help="row,col,count heat-map output")
    sp.add_argument("--trajectories", help="JSON-lines trajectory output")
    sp.add_argument("--events", help="JSON-lines building enter/exit events")
    sp.add_argument("--incidents", help="incident log output")
    sp.add_argument("--age-band", type=float, nargs=2, metavar=("LO", "HI"),
                    help="only record persons aged in [LO, HI)")
    seed_arg(sp)
    limit_arg(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("inspect", help="print one person's record and agenda")
    sp.add_argument("--population", required=True)
    sp.add_argument("--agendas", required=True)
    sp.add_argument("--city")
    sp.add_argument("--person", type=int, required=True)
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("run", help="full pipeline into an output directory")
    sp.add_argument("--out", required=True)
    sp.add_argument("--city-rules")
    sp.add_argument("--layout")
    sp.add_argument("--patterns")
    sp.add_argument("--rules", help="agenda rule file (default: shipped weekday rules)")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--households", type=int)
    g.add_argument("--persons", type=int, default=600)
    sp.add_argument("--define", action="append", metavar="NAME=VALUE", help="agenda attribute override")
    sp.add_argument("--city-define", action="append", metavar="NAME=VALUE", help="city attribute override")
    sp.add_argument("--from-stage", choices=STAGES, default="city",
                    help="reuse earlier stage files from --out and start here")
    sim_args(sp)
    seed_arg(sp)
    limit_arg(sp)
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CrowdforgeError, RuleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
