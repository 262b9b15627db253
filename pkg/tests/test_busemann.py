import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIX
from oracles import floyd_warshall, uhp_acosh
from hyprod.busemann import (BusemannField, b_ray_from, busemann_gromov_product, busemann_value,
                             field_from_doc, ideal_triangle_points, sigma_comparison)
from hyprod.errors import DomainError, HorizonTooShortError, TruncatedRayError
from hyprod.hyperbolicity import fit_t_function, four_point_delta
from hyprod.spaces import Segment, UpperHalfPlane, load_space


def line_field():
    s = Segment(-10, 10)
    return BusemannField(s, "segment_plus", 0.0)


def hp_field():
    return BusemannField(UpperHalfPlane(), "uhp_vertical", (0.0, 1.0))


def tree_field(horizon=None):
    sp = load_space(FIX / "binary_d4.json")
    doc = dict(sp.doc["busemann"])
    if horizon is not None:
        doc["horizon"] = horizon
    return field_from_doc(sp, doc)


def test_segment_closed_form():
    assert busemann_value(line_field(), 4.0) == -4


def test_halfplane_closed_form():
    assert busemann_value(hp_field(), (0.0, math.e)) == pytest.approx(-1.0, abs=1e-15)


def test_tree_field_against_two_horizon_oracle():
    f = tree_field(horizon=4.0)
    sp = f.space
    D = floyd_warshall(sp.vertices, sp.edges)
    settled = 0
    for x in sp.vertices:
        far, near = D[x, 15] - 4, D[x, 3] - 2
        if far == near:
            assert busemann_value(f, x) == pytest.approx(far, abs=1e-12)
            settled += 1
        else:
            with pytest.raises(HorizonTooShortError) as e:
                busemann_value(f, x)
            assert e.value.defect == pytest.approx(abs(far - near))
    assert settled == sp.n - 3  # vertices 7, 15 and 16 sit past the half horizon


def test_segment_ray():
    r = b_ray_from(line_field(), 3.0, 5.0)
    assert r.length == 5 and r.at(2.0) == 5.0


def test_segment_ray_truncated():
    with pytest.raises(TruncatedRayError) as e:
        b_ray_from(line_field(), 8.0, 5.0)
    assert e.value.achieved == pytest.approx(2.0)


def test_halfplane_ray_vertical():
    r = b_ray_from(hp_field(), (2.0, 1.0), 2.0)
    for t in (0.0, 0.5, 2.0):
        x, y = r.evaluator(t)
        assert x == 2.0 and y == pytest.approx(math.exp(t))


def test_graph_ray_descends_at_unit_rate():
    f = tree_field(horizon=4.0)
    for x in (30, 22, 9, 27):
        r = b_ray_from(f, x, 3.0, allow_short=True)
        b0 = busemann_value(f, x)
        for t, v in zip(r.cumulative, r.points):
            assert busemann_value(f, v) == pytest.approx(b0 - t, abs=1e-9)


def test_nonpositive_length_rejected():
    with pytest.raises(DomainError):
        b_ray_from(line_field(), 0.0, 0.0)


def test_busemann_gromov_segment():
    f = line_field()
    assert busemann_gromov_product(f, 0.0, 4.0) == (4, 0)
    assert busemann_gromov_product(f, 4.0, 0.0) == (0, 4)


def test_busemann_gromov_mirror():
    f = hp_field()
    a, b = busemann_gromov_product(f, (0.0, 1.0), (3.0, 1.0))
    d = uhp_acosh((0, 1), (3, 1))
    assert a == pytest.approx(d / 2) and b == pytest.approx(d / 2)


def test_ideal_triangle_segment():
    it = ideal_triangle_points(line_field(), 0.0, 4.0)
    assert it.tilde_u == it.tilde_x == it.tilde_y == 4
    assert it.spread == 0 and it.fellow_sup == 0


def test_ideal_triangle_tree_merge_vertex():
    f = tree_field(horizon=4.0)
    it = ideal_triangle_points(f, 29, 22)
    assert it.tilde_u == it.tilde_x == it.tilde_y
    assert it.spread == 0


def test_ideal_triangle_halfplane_within_eight_delta(halfplane):
    f = field_from_doc(halfplane, halfplane.doc["busemann"])
    dl = four_point_delta(halfplane, "all", n=200, seed=0).delta
    pts = halfplane.sample_points(40, 5)
    for x, y in zip(pts[::2], pts[1::2]):
        it = ideal_triangle_points(f, x, y)
        assert it.spread <= 8 * dl + 4 * halfplane.mesh
        assert it.fellow_sup <= 8 * dl + 4 * halfplane.mesh


def test_sigma_is_geodesic():
    s = Segment(-10, 10)
    assert sigma_comparison(s, 0.0, 6.0, s.geodesic(0.0, 6.0), R=0).sup == 0


def test_sigma_stopped_short():
    s = Segment(-10, 10)
    c = sigma_comparison(s, 0.0, 6.0, [0.0, 4.0], R=2.0)
    assert c.sup == pytest.approx(2.0) and c.holds(0.0, 1e-12)


def test_sigma_perturbed_halfplane(halfplane):
    x, y = (-3.0, 1.0), (3.0, 1.0)
    g = halfplane.geodesic(x, y)
    rng = np.random.default_rng(0)
    pts = [x]
    for t in np.linspace(0, g.length, 31)[1:-1]:
        px, py = g.at(t)
        pts.append((px, py * math.exp(rng.uniform(-0.1, 0.1))))
    pts.append(y)
    c = sigma_comparison(halfplane, x, y, pts)
    dl = four_point_delta(halfplane, "all", n=200, seed=0).delta
    assert c.sup > 0 and c.holds(dl, 4 * halfplane.mesh)


def test_sigma_not_unit_speed_rejected():
    s = Segment(-10, 10)
    from hyprod.spaces import GeodesicPath
    bad = GeodesicPath([0.0, 4.0], np.array([0.0, 2.0]))
    with pytest.raises(DomainError):
        sigma_comparison(s, 0.0, 4.0, bad)


H = UpperHalfPlane()
pt = st.tuples(st.floats(-5, 5), st.floats(0.14, 7.3))


@settings(max_examples=150, deadline=None)
@given(pt, pt)
def test_halfplane_field_invariants(x, y):
    f = hp_field()
    d = H.distance(x, y)
    assert abs(f(x) - f(y)) <= d + 1e-12
    a, b = busemann_gromov_product(f, x, y)
    assert a + b == pytest.approx(d, abs=1e-9)
    assert min(a, b) >= -1e-9


@settings(max_examples=40, deadline=None)
@given(pt, pt)
def test_busemann_is_t_function_along_geodesics(x, y):
    f = hp_field()
    g = H.geodesic(x, y)
    ts, pts = g.sample(0.05)
    vals = np.array([f(p) for p in pts])
    model = fit_t_function(0.0, g.length, vals[0], vals[-1])
    assert np.max(np.abs(vals - model(np.asarray(ts)))) <= 4 * math.log(3) + 1e-6
