import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.csgraph import connected_components

from conftest import FIX
from oracles import nx_all_pairs, nx_product_distance
from hyprod.errors import DomainError
from hyprod.hyperbolicity import four_point_from_matrix
from hyprod.product import (ProductSpec, build_product, de_distance, dm_distance, fellow_travel_check,
                            gamma_c_curve, gamma_curve, gamma_star, inner_distance, load_product_spec,
                            metric_comparison, product_delta, verify_pair)
from hyprod.spaces import Segment


# construction

def test_diagonal_is_a_path(diagonal):
    assert diagonal.n_nodes == 81 and diagonal.n_edges == 80
    assert all(p[0] == p[1] for p in map(diagonal.point, range(diagonal.n_nodes)))


def test_cross_is_four_arms(cross):
    assert cross.n_nodes == 161 and cross.n_edges == 160 and cross.n_components == 1
    pts = [cross.point(u) for u in range(cross.n_nodes)]
    assert all(abs(abs(a) - abs(b)) < 1e-12 for a, b in pts)
    deg = np.diff(cross.graph().indptr)
    assert sorted(deg)[-1] == 4 and (deg == 1).sum() == 4


def test_halfplane_slab_matches_brute_force_count(small_hp_product):
    Y = small_hp_product
    L1, L2 = Y.m1.levels, Y.m2.levels
    brute = int((np.abs(L1[:, None] - L2[None, :]) <= Y.spec.eps + 1e-12).sum())
    assert Y.n_nodes == brute == Y.mesh_formula_count()
    assert connected_components(Y.graph(), directed=False)[0] == 1


def test_basepoint_needs_two_basepoints():
    s = Segment(-1, 1)
    with pytest.raises(DomainError):
        ProductSpec(s, Segment(-1, 1), mode="basepoint", basepoints=None)


# distances

def test_diagonal_inner_distances(diagonal):
    p, q = (0.0, 0.0), (5.0, 5.0)
    assert inner_distance(diagonal, p, q) == pytest.approx(5)
    assert diagonal.inner_distance(p, q, "euclidean") == pytest.approx(5 * math.sqrt(2), abs=1e-12)


def test_cross_through_origin(cross):
    p, q = (3.0, 3.0), (2.0, -2.0)
    u, v = cross.resolve(p), cross.resolve(q)
    assert inner_distance(cross, p, q) == 5 == nx_product_distance(cross, u, v)
    assert dm_distance(cross, p, q) == 5
    assert de_distance(cross, p, q) == pytest.approx(math.sqrt(26))
    assert dm_distance(cross, p, p) == 0


def test_cross_inner_equals_max_everywhere(cross):
    D = nx_all_pairs(cross)
    DM = np.array([[cross.dm(u, v) for v in range(cross.n_nodes)] for u in range(cross.n_nodes)])
    assert np.array_equal(D, DM)
    assert four_point_from_matrix(D) == 0


@settings(max_examples=50, deadline=None)
@given(st.data())
def test_small_halfplane_metric_sandwich(small_hp_product, data):
    Y = small_hp_product
    u = data.draw(st.integers(0, Y.n_nodes - 1))
    v = data.draw(st.integers(0, Y.n_nodes - 1))
    d = Y.inner_distance(u, v)
    dm, de = Y.dm(u, v), Y.de(u, v)
    assert dm <= de + 1e-12 <= math.sqrt(2) * dm + 2e-12
    assert dm <= d + 1e-9
    assert d <= dm + 20 * Y.delta + Y.slack
    assert Y.inner_distance(v, u) == pytest.approx(d, abs=1e-12)


def test_small_halfplane_against_networkx(small_hp_product):
    Y = small_hp_product
    rng = np.random.default_rng(4)
    for u, v in rng.integers(0, Y.n_nodes, (10, 2)):
        assert Y.inner_distance(int(u), int(v)) == pytest.approx(nx_product_distance(Y, u, v), abs=1e-9)


# curves

def test_diagonal_gamma(diagonal):
    gc = gamma_curve(diagonal, (0.0, 0.0), (-3.0, -3.0))
    assert (gc.a, gc.b, gc.gap) == (0, 3, 0)
    assert gc.gamma.length == pytest.approx(3)
    gcc = gamma_c_curve(diagonal, (0.0, 0.0), (-3.0, -3.0))
    assert all(L == 0 for L in gcc.bridge_lengths)
    assert gcc.gamma_c.length == pytest.approx(gcc.d_m)
    gs = gamma_star(diagonal, (0.0, 0.0), (-3.0, -3.0))
    assert gs.d == pytest.approx(gs.d_m) and gs.a_star == pytest.approx(gs.a)


def test_cross_gamma_arm_arithmetic(cross):
    gc = gamma_curve(cross, (3.0, 3.0), (2.0, -2.0))
    a_s = sorted([gc.a1, gc.a2])
    b_s = sorted([gc.b1, gc.b2])
    assert a_s == [1, 3] and b_s == [0, 2]
    assert (gc.a, gc.b) == (3, 2) and gc.gap == 0
    assert gc.gamma.length == pytest.approx(5)


def test_cross_adjacent_arms_splice_at_origin(cross):
    gcc = gamma_c_curve(cross, (3.0, 3.0), (2.0, -2.0))
    assert gcc.tau == pytest.approx(3)
    pts = gcc.gamma_c.points
    assert any(abs(p[0]) < 1e-12 and abs(p[1]) < 1e-12 for p in pts)
    gs = gamma_star(cross, (3.0, 3.0), (2.0, -2.0))
    assert gs.d == gs.d_m == 5


def test_fellow_travel_zero_on_lines(cross, diagonal):
    assert fellow_travel_check(cross, (3.0, 3.0), (2.0, -2.0)).sup == 0
    assert fellow_travel_check(diagonal, (0.0, 0.0), (-3.0, -3.0)).sup == 0


def test_small_halfplane_pairs_within_bounds(small_hp_product):
    Y = small_hp_product
    for u, v in Y.sample_pairs(6, 2):
        r = verify_pair(Y, u, v)
        assert all(r[k] for k in r if k.startswith("ok_")), r
        assert 0 <= r["a_star"] - r["a"] <= 10 * Y.delta + Y.slack


def test_product_delta_lines(cross, diagonal):
    assert product_delta(diagonal, n=81).delta == 0
    est = product_delta(cross, n=161)
    assert est.is_exhaustive and est.delta == 0


def test_small_halfplane_delta_finite(small_hp_product):
    vals = [product_delta(small_hp_product, n=30, seed=s).delta for s in (0, 1, 2)]
    assert all(0 < v < math.inf for v in vals)


def test_metric_comparison_lines(cross, diagonal):
    for Y in (cross, diagonal):
        mc = metric_comparison(Y, n_pairs=20)
        assert mc["max_excess"] == 0 and mc["flavor_ok"] and mc["ball_ok"]


def test_load_spec_missing_factor(tmp_path):
    (tmp_path / "p.json").write_text('{"factor1": "nope.json", "factor2": "nope.json",'
                                     ' "mode": "busemann", "mesh": 0.5}')
    with pytest.raises(FileNotFoundError, match="nope.json"):
        load_product_spec(tmp_path / "p.json")


def test_export_edges(tmp_path, diagonal):
    out = tmp_path / "e.csv"
    diagonal.export_edges(out, "euclidean")
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 81
    u, v, w, fl = lines[1].split(",")
    assert float(w) == pytest.approx(0.25 * math.sqrt(2)) and fl == "euclidean"
