import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from crowdforge.citygen import LayoutConfig, generate_city
from crowdforge.errors import GenerationError
from crowdforge.harness.pipeline import data_path
from crowdforge.navgraph import NavGraph, Path, build_navgraph, position_at_distance
from crowdforge.rulelang import INVALID, load_rules, resolve_source

TWO_DOORS = ("@StartRule\nL --> [ t('0.2, 0, 0) entrance(\"house\") ] "
             "[ t('0.8, 0, 0) entrance(\"shop\") ] extrude(6)\n")


def straight(length=10.0):
    pl = np.array([[0.0, 0.0], [length, 0.0]])
    return Path((0, 1), pl, length)


# -- paths -----------------------------------------------------------------------------------------


def test_position_at_distance_endpoints_and_midpoint():
    p = straight()
    assert position_at_distance(p, 0.0) == (0.0, 0.0)
    assert position_at_distance(p, 10.0) == (10.0, 0.0)
    assert position_at_distance(p, 5.0) == (5.0, 0.0)
    # out-of-range distances clamp
    assert position_at_distance(p, 12.0, warn=False) == (10.0, 0.0)


def test_zero_length_path():
    p = Path((3,), np.array([[1.0, 2.0]]), 0.0)
    assert position_at_distance(p, 0.0) == (1.0, 2.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=8),
       st.floats(0, 1), st.floats(0, 1))
def test_position_matches_segment_walk(points, f1, f2):
    pl = np.array(points)
    seg = np.hypot(*np.diff(pl, axis=0).T)
    pl = pl[np.concatenate([[True], seg > 1e-6])]
    if len(pl) < 2:
        return
    path = Path((), pl, float(np.hypot(*np.diff(pl, axis=0).T).sum()))

    def walk(d):
        for a, b in zip(pl[:-1], pl[1:]):
            L = float(np.hypot(*(b - a)))
            if d <= L:
                return a + (b - a) * (d / L)
            d -= L
        return pl[-1]

    for f in (f1, f2):
        d = f * path.total_length
        assert np.allclose(position_at_distance(path, d), walk(d), atol=1e-6)


# -- graphs against an independent shortest-path solver ---------------------------------------------


@st.composite
def random_graph(draw):
    n = draw(st.integers(3, 12))
    pts = np.array(draw(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100)), min_size=n, max_size=n)),
                   float)
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), min_size=n, max_size=3 * n))
    edges = []
    seen = set()
    for a, b in [(i, i + 1) for i in range(n - 1)] + pairs:
        if a == b or (min(a, b), max(a, b)) in seen:
            continue
        seen.add((min(a, b), max(a, b)))
        edges.append((a, b, float(np.hypot(*(pts[a] - pts[b]))) + 0.1))
    return NavGraph(pts, edges, {})


def oracle_distances(g):
    a = np.array([e[0] for e in g.edges])
    b = np.array([e[1] for e in g.edges])
    w = np.array([e[2] for e in g.edges])
    m = coo_matrix((w, (a, b)), shape=(g.n_nodes, g.n_nodes)).tocsr()
    return dijkstra(m, directed=False)


@settings(max_examples=80, deadline=None)
@given(random_graph())
def test_distances_match_reference_solver(g):
    ref = oracle_distances(g)
    n = g.n_nodes
    for i in range(n):
        for j in range(n):
            assert g.node_distance(i, j) == pytest.approx(ref[i, j])


@settings(max_examples=60, deadline=None)
@given(random_graph())
def test_paths_are_consistent(g):
    n = g.n_nodes
    weight = {}
    for a, b, w in g.edges:
        weight[(a, b)] = weight[(b, a)] = w
    for i in range(n):
        for j in range(n):
            nodes = g.node_path(i, j)
            assert nodes[0] == i and nodes[-1] == j
            assert sum(weight[(u, v)] for u, v in zip(nodes[:-1], nodes[1:])) == pytest.approx(g.node_distance(i, j))
            assert g.node_distance(i, j) == pytest.approx(g.node_distance(j, i))
            for k in range(n):
                assert g.node_distance(i, k) <= g.node_distance(i, j) + g.node_distance(j, k) + 1e-9


def test_unreachable_is_invalid():
    g = NavGraph(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [6.0, 5.0]]), [(0, 1, 1.0), (2, 3, 1.0)], {})
    assert g.node_path(0, 3) is None
    assert g.shortest_path(0, 3) is INVALID


# -- city graphs -----------------------------------------------------------------------------------


def test_two_entrances_on_one_street():
    city = generate_city(resolve_source(TWO_DOORS), LayoutConfig(blocksX=1, blocksY=1, lotsPerBlockX=1,
                                                                 lotsPerBlockY=1, streetWidth=10), 0)
    nav = build_navgraph(city)
    (b,) = city.buildings
    e0, e1 = (e.position for e in b.entrances)
    # both doors face the south street: connector to the centerline, along it, connector back
    expected = 5.0 + abs(e1[0] - e0[0]) + 5.0
    assert nav.distance(("entrance", 0, 0), ("entrance", 0, 1)) == pytest.approx(expected)
    assert nav.distance(("entrance", 0, 0), ("entrance", 0, 0)) == 0.0


def test_objects_attach_through_zone_entry():
    city = generate_city(load_rules(data_path("shop_park_lot.cga")),
                         LayoutConfig(blocksX=1, blocksY=1, lotsPerBlockX=1, lotsPerBlockY=1,
                                      lotWidth=12, lotDepth=12), 0)
    nav = build_navgraph(city)
    nav.check_connected()
    zone = city.zones[0]
    entries = np.array(zone.entry_points)
    for obj in city.objects:
        gaps = np.hypot(*(entries - np.array(obj.position)).T)
        k = int(np.argmin(gaps))
        path = nav.shortest_path(("object", obj.id), ("zone", zone.id, k))
        assert path.total_length == pytest.approx(gaps[k])


def test_structured_city_is_connected_and_symmetric():
    from crowdforge.citygen.layout import read_layout
    city = generate_city(load_rules(data_path("structured_city.cga")), read_layout(data_path("structured.layout")), 0)
    nav = build_navgraph(city)
    nav.check_connected()
    ids = [b.id for b in city.buildings][:12]
    for a in ids:
        for b in ids:
            assert nav.building_distance(a, b) == pytest.approx(nav.building_distance(b, a))


def test_disconnected_graph_is_reported():
    g = NavGraph(np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]]), [(0, 1, 1.0)],
                 {("entrance", 0, 0): 0, ("entrance", 1, 0): 2})
    with pytest.raises(GenerationError, match="entrance"):
        g.check_connected()


def test_free_point_routing_on_same_edge():
    g = NavGraph(np.array([[0.0, 0.0], [10.0, 0.0]]), [(0, 1, 10.0)], {})
    p = g.shortest_path((2.0, 1.0), (7.0, 1.0))
    assert p.total_length == pytest.approx(1.0 + 5.0 + 1.0)
