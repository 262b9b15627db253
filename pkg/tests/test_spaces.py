import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIX, TREE_FIXTURES
from oracles import floyd_warshall, uhp_acosh
from hyprod.errors import ConfigError, DomainError
from hyprod.spaces import (GraphSpace, RegularTree, Segment, UpperHalfPlane, check_geodesic_path,
                           load_space, space_from_doc)


def c4():
    return GraphSpace(range(4), [(i, (i + 1) % 4) for i in range(4)], label="c4")


# distance / geodesic examples

def test_segment_distance():
    assert Segment(-10, 10).distance(0, 6) == 6


def test_halfplane_vertical_distance():
    assert UpperHalfPlane().distance((0, 1), (0, math.e)) == pytest.approx(1.0, abs=1e-12)


def test_c4_distance_matches_floyd_warshall():
    g = c4()
    D = floyd_warshall(range(4), [(i, (i + 1) % 4) for i in range(4)])
    assert g.distance(0, 2) == D[0, 2] == 2
    assert np.array_equal(g.all_pairs, D)


@pytest.mark.parametrize("name", TREE_FIXTURES + ["c4.json", "c40.json"])
def test_fixture_metric_matches_floyd_warshall(name):
    sp = load_space(FIX / name)
    D = floyd_warshall(sp.vertices, sp.edges)
    assert np.allclose(sp.all_pairs, D, atol=1e-12)


def test_segment_geodesic():
    g = Segment(-5, 5).geodesic(0, 4)
    assert g.points == [0.0, 4.0] and g.length == 4


def test_star_leaf_to_leaf_through_center():
    sp = load_space(FIX / "star_234.json")
    # arm 1 is vertices 1-2, arm 2 is vertices 3-5
    g = sp.geodesic(2, 5)
    assert 0 in g.points and g.length == 5


def test_c4_tie_break_is_lexicographic():
    assert c4().geodesic(0, 2).points == [0, 1, 2]


def test_disconnected_graph_rejected():
    with pytest.raises(DomainError):
        GraphSpace(range(4), [(0, 1), (2, 3)])


# sampling

def test_sample_all_vertices():
    assert c4().sample_points(4, 0) == [0, 1, 2, 3]


def test_segment_sampling_repeatable():
    s = Segment(-5, 5)
    a, b = s.sample_points(3, 7), s.sample_points(3, 7)
    assert a == b and len(a) == 3 and all(-5 <= x <= 5 for x in a)


def test_halfplane_sampling_in_domain():
    pts = UpperHalfPlane().sample_points(100, 1)
    assert len(pts) == 100 and all(y > 0 for _, y in pts)


# path length

def test_path_length_segment():
    assert Segment(-5, 5).path_length([0, 3, 1]) == 5


def test_path_length_of_geodesic_is_its_length():
    sp = load_space(FIX / "random_tree_50.json")
    g = sp.geodesic(3, 41)
    assert sp.path_length(g.points) == g.length


def test_square_detour_in_halfplane():
    H = UpperHalfPlane()
    pts = [(0, 1), (1, 1), (1, 2), (0, 2)]
    expected = sum(uhp_acosh(p, q) for p, q in zip(pts, pts[1:]))
    assert H.path_length(pts) == pytest.approx(expected, rel=1e-12)


def test_empty_polyline_rejected():
    with pytest.raises(DomainError):
        Segment(0, 1).path_length([])


# properties

H = UpperHalfPlane()
hp_points = st.tuples(st.floats(-5, 5), st.floats(0.14, 7.3))


@settings(max_examples=200, deadline=None)
@given(hp_points, hp_points, hp_points)
def test_halfplane_metric_axioms(p, q, r):
    d = H.distance
    assert d(p, q) == d(q, p)
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-9
    assert d(p, q) == pytest.approx(uhp_acosh(p, q), rel=1e-9, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(hp_points, hp_points)
def test_halfplane_geodesic_is_arclength(p, q):
    g = H.geodesic(p, q)
    assert g.length == pytest.approx(H.distance(p, q), abs=1e-9)
    for t in np.linspace(0, g.length, 7):
        x = g.at(t)
        assert H.distance(p, x) == pytest.approx(t, abs=1e-7)
        assert H.distance(x, q) == pytest.approx(g.length - t, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.data())
def test_tree_metric_axioms(k, depth, data):
    T = RegularTree(k, depth)
    u, v, w = (data.draw(st.sampled_from(T.vertices)) for _ in range(3))
    assert T.distance(u, v) == T.distance(v, u)
    assert T.distance(u, w) <= T.distance(u, v) + T.distance(v, w) + 1e-12
    g = T.geodesic(u, v)
    assert check_geodesic_path(T, g) == 0.0
    assert g.length == T.distance(u, v)


# documents

def test_space_doc_roundtrip():
    for name in TREE_FIXTURES:
        sp = load_space(FIX / name)
        again = space_from_doc(sp.to_doc())
        assert np.array_equal(again.all_pairs, sp.all_pairs)


def test_invalid_doc_names_field():
    with pytest.raises(ConfigError) as e:
        space_from_doc({"kind": "UpperHalfPlane", "box": {"x": [0, 1], "y": [1, 2]}})
    assert "h" in e.value.fields


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        space_from_doc(json.loads('{"kind": "Sphere"}'))
