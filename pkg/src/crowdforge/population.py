"""Household sampling from a pattern table and home assignment."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .citygen.city import SemanticCity
from .errors import GenerationError, InputError

HEADER = ["adult_men", "adult_women", "elder_men", "elder_women", "boys", "girls", "count"]
POPULATION_STREAM = 0x909

# category -> (band, is_woman)
CATEGORIES = {
    "adult_men": ("adult", False),
    "adult_women": ("adult", True),
    "elder_men": ("elder", False),
    "elder_women": ("elder", True),
    "boys": ("child", False),
    "girls": ("child", True),
}


@dataclass(frozen=True)
class HouseholdPattern:
    id: int
    adult_men: int = 0
    adult_women: int = 0
    elder_men: int = 0
    elder_women: int = 0
    boys: int = 0
    girls: int = 0
    weight: float = 1.0

    @property
    def size(self) -> int:
        return self.adult_men + self.adult_women + self.elder_men + self.elder_women + self.boys + self.girls

    def members(self) -> list[tuple[str, bool]]:
        """(band, is_woman) per member: adults, elders, boys, girls."""
        out = []
        for cat in ("adult_men", "adult_women", "elder_men", "elder_women", "boys", "girls"):
            out += [CATEGORIES[cat]] * getattr(self, cat)
        return out


@dataclass
class PopulationConfig:
    age_bands: dict = field(default_factory=lambda: {"child": (4, 17), "adult": (18, 64), "elder": (65, 90)})
    walk_speeds: dict = field(default_factory=lambda: {"child": 1.1, "adult": 1.4, "elder": 0.9})


@dataclass
class Person:
    id: int
    household_id: int
    age: int
    gender: bool  # True for woman
    walk_speed: float
    home: int
    band: str

    def to_dict(self) -> dict:
        return {"id": self.id, "householdId": self.household_id, "age": self.age, "gender": self.gender,
                "walkSpeed": self.walk_speed, "home": self.home, "band": self.band}

    @staticmethod
    def from_dict(d: dict) -> "Person":
        return Person(int(d["id"]), int(d["householdId"]), int(d["age"]), bool(d["gender"]),
                      float(d["walkSpeed"]), int(d["home"]), d.get("band", ""))


@dataclass
class Household:
    id: int
    member_ids: list
    home: int
    pattern: int

    def to_dict(self) -> dict:
        return {"id": self.id, "members": list(self.member_ids), "home": self.home, "pattern": self.pattern}

    @staticmethod
    def from_dict(d: dict) -> "Household":
        return Household(int(d["id"]), [int(m) for m in d["members"]], int(d["home"]), int(d.get("pattern", -1)))


@dataclass
class Population:
    households: list
    persons: list
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def person(self, pid: int) -> Person:
        if not 0 <= pid < len(self.persons):
            raise InputError(f"unknown person id {pid}")
        return self.persons[pid]

    def members(self, household: Household) -> list[Person]:
        return [self.persons[i] for i in household.member_ids]

    def to_dict(self) -> dict:
        return {"meta": self.meta, "seed": self.seed,
                "households": [h.to_dict() for h in self.households],
                "persons": [p.to_dict() for p in self.persons]}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @staticmethod
    def from_dict(d: dict) -> "Population":
        try:
            pop = Population([Household.from_dict(h) for h in d["households"]],
                             [Person.from_dict(p) for p in d["persons"]], int(d.get("seed", 0)), d.get("meta", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed population document: {exc!r}") from None
        if [p.id for p in pop.persons] != list(range(len(pop.persons))):
            raise InputError("person ids must be dense and ordered 0..n-1")
        if [h.id for h in pop.households] != list(range(len(pop.households))):
            raise InputError("household ids must be dense and ordered 0..n-1")
        return pop

    @staticmethod
    def load(path: str) -> "Population":
        try:
            with open(path, encoding="utf-8") as fh:
                return Population.from_dict(json.load(fh))
        except OSError as exc:
            raise InputError(f"cannot read population {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})") from None


def load_patterns(path: str) -> list[HouseholdPattern]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return parse_patterns(fh.read(), path)
    except OSError as exc:
        raise InputError(f"cannot read patterns {path}: {exc.strerror}") from None


def parse_patterns(text: str, path: str = "<patterns>") -> list[HouseholdPattern]:
    rows = [r for r in csv.reader(line for line in text.splitlines() if not line.lstrip().startswith("#"))]
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows or [c.strip() for c in rows[0]] != HEADER:
        raise InputError(f"{path}: header must be {','.join(HEADER)}")
    out = []
    for n, row in enumerate(rows[1:], 2):
        if len(row) != len(HEADER):
            raise InputError(f"{path}: row {n}: expected {len(HEADER)} fields, got {len(row)}")
        try:
            counts = [int(c) for c in row[:6]]
            weight = float(row[6])
        except ValueError:
            raise InputError(f"{path}: row {n}: non-numeric field") from None
        if any(c < 0 for c in counts):
            raise InputError(f"{path}: row {n}: negative member count")
        if sum(counts) == 0:
            raise InputError(f"{path}: row {n}: pattern has no members")
        if weight < 0 or not np.isfinite(weight):
            raise InputError(f"{path}: row {n}: negative count")
        out.append(HouseholdPattern(len(out), *counts, weight=weight))
    if not out:
        raise InputError(f"{path}: no patterns")
    return out


def pattern_cdf(patterns: list[HouseholdPattern]) -> np.ndarray:
    w = np.array([p.weight for p in patterns], float)
    total = w.sum()
    if total <= 0:
        raise GenerationError("pattern weights sum to zero")
    return np.cumsum(w) / total


def pick_pattern(cdf: np.ndarray, u: float) -> int:
    """Inverse CDF: the first pattern whose cumulative weight exceeds ``u``."""
    i = int(np.searchsorted(cdf, u, side="right"))
    return min(i, len(cdf) - 1)


def sample_household(patterns: list[HouseholdPattern], rng: np.random.Generator,
                     config: Optional[PopulationConfig] = None, cdf: Optional[np.ndarray] = None):
    """One pattern draw plus member ages: returns (pattern, [(band, is_woman, age)])."""
    config = config or PopulationConfig()
    cdf = pattern_cdf(patterns) if cdf is None else cdf
    pat = patterns[pick_pattern(cdf, float(rng.random()))]
    members = []
    for band, woman in pat.members():
        lo, hi = config.age_bands[band]
        members.append((band, woman, int(rng.integers(lo, hi + 1))))
    return pat, members


def assign_homes(n_households: int, city: SemanticCity, rng: np.random.Generator) -> list[int]:
    """Building id per household; each draw is weighted by remaining capacity."""
    homes = [b for b in city.buildings if b.residential_capacity > 0]
    remaining = np.array([b.residential_capacity for b in homes], dtype=np.int64)
    total = int(remaining.sum())
    if n_households > total:
        raise GenerationError(f"not enough residential capacity: {n_households} households, "
                              f"{total} apartments (shortfall {n_households - total})")
    out = []
    for _ in range(n_households):
        cum = np.cumsum(remaining)
        k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        k = min(k, len(homes) - 1)
        while remaining[k] == 0:  # guard against float edge effects
            k -= 1
        remaining[k] -= 1
        out.append(homes[k].id)
    return out


def generate_population(city: SemanticCity, patterns: list[HouseholdPattern], target_households: Optional[int],
                        seed: int, config: Optional[PopulationConfig] = None,
                        target_persons: Optional[int] = None, meta: Optional[dict] = None) -> Population:
    """Sample households, then homes, then person records.

    With ``target_persons`` households are drawn until the head count is
    reached exactly; the last draw is restricted to patterns that still fit.
    """
    config = config or PopulationConfig()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), POPULATION_STREAM]))
    cdf = pattern_cdf(patterns)
    drafts = []
    if target_persons is not None:
        count = 0
        while count < target_persons:
            left = target_persons - count
            fits = [p for p in patterns if p.size <= left and p.weight > 0]
            if not fits:
                raise GenerationError(f"no pattern fits the remaining {left} person(s)")
            use = patterns if all(p.size <= left for p in patterns if p.weight > 0) else fits
            pat, members = sample_household(use, rng, config, None if use is fits else cdf)
            drafts.append((pat, members))
            count += pat.size
    else:
        if target_households is None or target_households < 0:
            raise InputError("households must be a non-negative count")
        for _ in range(target_households):
            drafts.append(sample_household(patterns, rng, config, cdf))
    homes = assign_homes(len(drafts), city, rng)
    households, persons = [], []
    for hid, ((pat, members), home) in enumerate(zip(drafts, homes)):
        ids = []
        for band, woman, age in members:
            pid = len(persons)
            persons.append(Person(pid, hid, age, woman, float(config.walk_speeds[band]), home, band))
            ids.append(pid)
        households.append(Household(hid, ids, home, pat.id))
    m = {"tool": "crowdforge", "version": __version__, "seed": int(seed)}
    m.update(meta or {})
    return Population(households, persons, int(seed), m)
