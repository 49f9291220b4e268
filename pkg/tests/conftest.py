import pytest

from crowdforge.citygen import generate_city
from crowdforge.citygen.layout import read_layout
from crowdforge.harness.pipeline import data_path
from crowdforge.navgraph import build_navgraph
from crowdforge.population import Household, Person, Population
from crowdforge.rulelang import load_rules

SPEEDS = {"child": 1.1, "adult": 1.4, "elder": 0.9}


def band_of(age):
    return "child" if age < 18 else "adult" if age < 65 else "elder"


def households_population(city, households, seed=0):
    """Population with the given member ages per household, all living in the first houses."""
    homes = [b.id for b in city.buildings if b.has_type("house")]
    hh, persons = [], []
    for hid, ages in enumerate(households):
        home = homes[hid % len(homes)]
        ids = []
        for age in ages:
            pid = len(persons)
            band = band_of(age)
            persons.append(Person(pid, hid, age, pid % 2 == 1, SPEEDS[band], home, band))
            ids.append(pid)
        hh.append(Household(hid, ids, home, 0))
    return Population(hh, persons, seed, {})


@pytest.fixture(scope="session")
def structured():
    city = generate_city(load_rules(data_path("structured_city.cga")), read_layout(data_path("structured.layout")), 0)
    return city, build_navgraph(city)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
