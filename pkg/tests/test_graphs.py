import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (brute_delaunay, brute_gabriel, brute_rng, empty_circumcircles,
                     is_planar_drawing, prim_mst)
from proxnet.errors import InvalidParameterError
from proxnet.geom import Window, configuration
from proxnet.graphs import (FULL_LUNE, Network, ProximityTemplate, UnionFind, build_delaunay,
                            build_gabriel, build_mst, build_network, build_proximity, build_rng,
                            components, is_subgraph, write_network)


def uniform(n, seed, side=None):
    side = side or math.sqrt(n)
    rng = np.random.default_rng(seed)
    return configuration(rng.uniform(0, side, (n, 2)), Window.square(side))


def test_two_points_single_edge():
    net = build_rng(configuration([(0, 0), (1, 0)]))
    assert net.edge_set() == {(0, 1)}
    assert net.lengths.tolist() == [1.0]


def test_rng_third_point_in_lune():
    net = build_rng(configuration([(0, 0), (1, 0), (0.5, 0.1)]))
    assert net.edge_set() == {(0, 2), (1, 2)}


def test_rng_empty_and_singleton():
    assert build_rng(configuration([])).m == 0
    assert build_rng(configuration([(3, 3)])).m == 0


def test_rng_matches_brute_force_500():
    c = uniform(500, 1)
    assert build_rng(c).edge_set() == brute_rng(c.points)


def test_full_lune_template_is_rng():
    c = uniform(300, 2)
    assert build_proximity(c, FULL_LUNE).edge_set() == build_rng(c).edge_set()


def test_gabriel_right_angle_boundary_point_does_not_block():
    net = build_gabriel(configuration([(0, 0), (1, 0), (0, 1)]))
    assert (1, 2) in net.edge_set()


def test_gabriel_matches_brute_force_and_contains_rng():
    c = uniform(500, 3)
    gab = build_gabriel(c)
    assert gab.edge_set() == brute_gabriel(c.points)
    assert is_subgraph(build_rng(c), gab)


def test_invalid_beta():
    with pytest.raises(InvalidParameterError):
        ProximityTemplate("beta_lune", 0.5)
    with pytest.raises(InvalidParameterError):
        ProximityTemplate("beta_lune", math.nan)
    with pytest.raises(InvalidParameterError):
        ProximityTemplate("square")


def test_beta_family_endpoints():
    c = uniform(200, 4)
    assert build_proximity(c, ProximityTemplate("beta_lune", 1.0)).edge_set() == build_gabriel(c).edge_set()
    assert build_proximity(c, ProximityTemplate("beta_lune", 2.0)).edge_set() == build_rng(c).edge_set()


def test_beta_family_nested():
    c = uniform(300, 5)
    nets = [build_proximity(c, ProximityTemplate("beta_lune", b)) for b in (1.0, 1.3, 1.7, 2.0)]
    for small_region, big_region in zip(nets, nets[1:]):
        assert is_subgraph(big_region, small_region)


def test_delaunay_triangle():
    assert build_delaunay(configuration([(0, 0), (1, 0), (0, 1)])).edge_set() == {(0, 1), (0, 2), (1, 2)}


def test_delaunay_convex_quadrilateral():
    pts = [(0, 0), (2, 0), (2.2, 1.5), (0.1, 1.1)]
    net = build_delaunay(configuration(pts))
    assert net.m == 5
    assert net.edge_set() == brute_delaunay(pts)
    assert empty_circumcircles(pts, net.edge_set())


def test_delaunay_500_empty_circumcircles():
    c = uniform(500, 6)
    net = build_delaunay(c)
    assert empty_circumcircles(c.points, net.edge_set())
    assert net.edge_set() == brute_delaunay(c.points)


def test_delaunay_collinear_is_flagged_path():
    net = build_delaunay(configuration([(3, 3), (0, 0), (1, 1), (2, 2)]))
    assert "collinear" in net.flags
    assert net.edge_set() == {(1, 2), (2, 3), (0, 3)}


def test_mst_single_point_and_triangle():
    assert build_mst(configuration([(1, 1)])).m == 0
    # sides 1, 1.1, 1.2
    a, b = (0.0, 0.0), (1.0, 0.0)
    x = (1 + 1.2**2 - 1.1**2) / 2
    c = (x, math.sqrt(1.2**2 - x * x))
    net = build_mst(configuration([a, b, c]))
    assert sorted(np.round(net.lengths, 9).tolist()) == [1.0, 1.1]


def test_mst_empty_rejected():
    with pytest.raises(InvalidParameterError):
        build_mst(configuration([]))


def test_mst_matches_prim_300():
    c = uniform(300, 7)
    total, edges = prim_mst(c.points)
    net = build_mst(c)
    assert net.total_length() == pytest.approx(total, rel=1e-12)
    assert net.edge_set() == edges
    assert net.m == c.n - 1
    assert len(components(net)) == 1


def test_mst_equal_length_ties_are_deterministic():
    # unit square: four equal sides, Kruskal keeps the (len, i, j)-smallest three
    net = build_mst(configuration([(0, 0), (1, 0), (1, 1), (0, 1)]))
    assert net.edge_set() == {(0, 1), (0, 3), (1, 2)}


def test_is_subgraph_examples():
    c = uniform(500, 8)
    mst, rng, gab, dt = build_mst(c), build_rng(c), build_gabriel(c), build_delaunay(c)
    assert is_subgraph(mst, rng) and is_subgraph(rng, gab) and is_subgraph(gab, dt)
    assert is_subgraph(rng, rng)
    assert not is_subgraph(dt, mst)


def test_is_subgraph_mismatched_n():
    with pytest.raises(InvalidParameterError):
        is_subgraph(build_rng(uniform(5, 0)), build_rng(uniform(6, 0)))


def test_components_examples():
    empty = build_rng(configuration([]))
    assert len(components(empty)) == 0
    part = components(Network(5, np.empty((0, 2)), np.empty(0), "rng"))
    assert len(part) == 5 and part.labels.tolist() == [0, 1, 2, 3, 4]
    path = configuration([(i, 0) for i in range(4)])
    assert len(components(build_rng(path))) == 1


def test_component_labels_are_smallest_members():
    c = configuration([(0, 0), (10, 0), (0.5, 0), (10.5, 0)])
    net = build_rng(c)
    keep = np.array([e in {(0, 2), (1, 3)} for e in map(tuple, net.edges.tolist())])
    part = components(net.subnetwork(keep))
    assert part.labels.tolist() == [0, 1, 0, 1]
    assert part.largest() == 0  # tie goes to the smaller label


def test_union_find():
    uf = UnionFind(4)
    assert uf.union(0, 1) and uf.union(2, 3) and not uf.union(1, 0)
    assert uf.find(0) == uf.find(1) != uf.find(2)
    assert uf.count == 2


@pytest.mark.parametrize("seed", range(20))
def test_rng_connected_and_planar(seed):
    c = uniform(int(np.random.default_rng(seed).integers(3, 150)), seed)
    rng_net = build_rng(c)
    assert len(components(rng_net)) == 1
    assert is_planar_drawing(c.points, rng_net.edges)
    assert is_planar_drawing(c.points, build_gabriel(c).edges)


def test_translation_invariance():
    c = uniform(200, 9)
    shifted = configuration(c.points + [1000.25, -37.5])
    for kind in ("rng", "gabriel", "delaunay", "mst"):
        assert build_network(c, kind).edge_set() == build_network(shifted, kind).edge_set()


def test_duplicates_do_not_crash():
    pts = [(0, 0), (1, 0), (0, 0), (0.5, 0.8), (1, 0)]
    c = configuration(pts)
    for kind in ("rng", "gabriel", "delaunay", "mst"):
        net = build_network(c, kind)
        assert len(components(net)) == 1
    assert build_mst(c).m == 4


def test_cocircular_grid_hierarchy():
    pts = [(x, y) for x in range(4) for y in range(4)]
    c = configuration(pts)
    rng_net, gab = build_rng(c), build_gabriel(c)
    assert rng_net.edge_set() == brute_rng(pts)
    assert gab.edge_set() == brute_gabriel(pts)
    assert is_subgraph(build_mst(c), rng_net)


def test_unknown_kind():
    with pytest.raises(InvalidParameterError):
        build_network(uniform(5, 0), "knn")


def test_network_invariants():
    c = uniform(300, 10)
    for kind in ("rng", "gabriel", "delaunay", "mst"):
        net = build_network(c, kind)
        assert (net.edges[:, 0] < net.edges[:, 1]).all()
        assert len(net.edge_set()) == net.m
        d = np.hypot(*(c.points[net.edges[:, 1]] - c.points[net.edges[:, 0]]).T)
        assert np.allclose(net.lengths, d, rtol=1e-9, atol=0)
        assert net.fingerprint == c.fingerprint()


def test_write_network(tmp_path):
    c = uniform(20, 11)
    net = build_rng(c)
    csv_path, json_path = write_network(net, tmp_path / "net")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "i,j,len" and len(lines) == net.m + 1
    assert '"kind": "rng"' in json_path.read_text()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(0, 10)), min_size=1, max_size=40))
def test_hierarchy_property(points):
    c = configuration(points)
    mst, rng_net, gab = build_mst(c), build_rng(c), build_gabriel(c)
    assert is_subgraph(mst, rng_net) and is_subgraph(rng_net, gab)
    assert rng_net.edge_set() == brute_rng(c.points)
    assert gab.edge_set() == brute_gabriel(c.points)
