import math

import numpy as np
import pytest

from conftest import FIX
from hyprod.boundary import (BoundarySample, classify_ray, converges_to_infinity, factorization_check,
                             in_neighborhood, product_sample, sequences_equivalent)
from hyprod.checks import default_rays
from hyprod.errors import DomainError
from hyprod.product import build_product, load_product_spec
from hyprod.suite import load_rays


def line_sample(points, z=0.0):
    metric = lambda A, B: np.abs(np.subtract.outer(np.asarray(A, float), np.asarray(B, float)))
    return BoundarySample(z, list(points), metric)


def arm(Y, s1, s2, K=10):
    return [Y.locate((s1 * k, s2 * k)) for k in range(K + 1)]


def test_diagonal_ray_converges(diagonal):
    s = product_sample(diagonal, arm(diagonal, 1, 1))
    ok, proxy = converges_to_infinity(s, 2.5)
    assert ok
    prof = s.proxy_profile()
    assert np.all(np.diff(prof) > 0)  # grows with the tail start


def test_bounded_sequence_does_not_converge():
    s = line_sample([1.0, -1.0] * 6)
    ok, proxy = converges_to_infinity(s, 2.5)
    assert not ok and proxy <= 1


def test_cross_arm_proxy_is_distance_to_origin(cross):
    nodes = arm(cross, 1, -1)
    s = product_sample(cross, nodes)
    ok, proxy = converges_to_infinity(s, 2.5)
    # on a tree arm (x_k . x_l)_z = min(k, l); the tail starts at k = 5
    assert ok and proxy == 5


def test_sequence_equivalent_to_its_reindexing(cross):
    nodes = arm(cross, 1, 1)
    a = product_sample(cross, nodes)
    assert sequences_equivalent(a, a, 2.5)
    assert in_neighborhood(a, a, 2.5)
    assert sequences_equivalent(a, product_sample(cross, nodes[:1] + nodes[2:] + nodes[-1:]), 2.5)


def test_different_arms_not_equivalent(cross):
    a = product_sample(cross, arm(cross, 1, 1))
    b = product_sample(cross, arm(cross, -1, 1))
    assert not sequences_equivalent(a, b, 2.5)
    assert a.cross(b)[5:, 5:].max() == 0


def test_non_convergent_input_rejected():
    s = line_sample([1.0, -1.0] * 6)
    with pytest.raises(DomainError):
        sequences_equivalent(s, s, 2.5)


def test_diagonal_cases(diagonal):
    up = classify_ray(diagonal, arm(diagonal, 1, 1))  # B = -x decreases
    down = classify_ray(diagonal, arm(diagonal, -1, -1))
    assert up.case == "Case1_ToU"
    assert down.case == "Case2_Factorized" and down.max_gap == 0


def test_cross_four_arms(cross):
    rays = [arm(cross, s1, s2) for s1 in (1, -1) for s2 in (1, -1)]
    assert all(classify_ray(cross, r).case == "Case2_Factorized" for r in rays)
    rep = factorization_check(cross, rays)
    assert rep["classes"] == 4 and rep["injective"] and rep["halving_stable"]
    assert rep["factor_pairs"] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert rep["reflexive"] and rep["symmetric"] and rep["transitive"]


def test_cross_duplicate_ray_joins_its_arm(cross):
    rays = default_rays(cross, 10)
    rays.append(rays[0][:1] + rays[0][2:] + rays[0][-1:])
    rep = factorization_check(cross, rays)
    assert rep["classes"] == 4 and rep["labels"][-1] == rep["labels"][0]


def test_cross_rays_file(cross):
    rays = load_rays(cross, FIX / "cross_rays.json", 10)
    assert factorization_check(cross, rays)["classes"] == 4


def test_diagonal_two_classes(diagonal):
    rep = factorization_check(diagonal, default_rays(diagonal, 10))
    assert rep["classes"] == 2 and rep["case1"] == 1 and rep["case2"] == 1


def test_halfplane_distinct_factor_limits():
    Y = build_product(load_product_spec(FIX / "halfplane_product.json"))
    rays = load_rays(Y, FIX / "halfplane_rays.json", 4)
    rep = factorization_check(Y, rays, halving=False)
    assert rep["case2"] == 4 and rep["injective"]
    assert len(set(map(tuple, rep["factor_pairs"]))) == 4
    assert rep["classes"] == 4
