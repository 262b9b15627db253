"""Acceptance criteria 1-7, each at its stated tolerance.

Every test prints a single ``ACCEPTANCE <n>: PASS|FAIL`` line; they are
repeated in the pytest terminal summary.
"""

import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import CONFIGS, FIX, TREE_FIXTURES
from oracles import floyd_warshall, four_point_brute, nx_all_pairs
from hyprod.boundary import factorization_check
from hyprod.checks import (SlackPolicy, analytic_morse, default_rays, graph_detours, tcheck_checks,
                           uhp_detours)
from hyprod.hyperbolicity import (MorseParams, fit_t_function, four_point_delta, min_distance_to_polyline,
                                  morse_check, tripod_decomposition)
from hyprod.product import build_product, load_product_spec, product_delta, verify_pair
from hyprod.spaces import load_space


# 1. trees

def test_criterion_1_tree_exactness(report_criterion):
    assert len(TREE_FIXTURES) >= 3
    details, ok = [], True
    for name in TREE_FIXTURES:
        t0 = time.perf_counter()
        sp = load_space(FIX / name)
        assert sp.n <= 60 and len(sp.edges) == sp.n - 1
        est = four_point_delta(sp, "all")
        spread = max(tripod_decomposition(sp, *tri).spread for tri in itertools.combinations(sp.vertices, 3))
        D = sp.all_pairs
        dev = 0.0
        for x, y in itertools.combinations(sp.vertices, 2):
            g = sp.geodesic(x, y)
            cols = [sp.index[v] for v in g.points]
            for zi in range(sp.n):
                vals = D[zi, cols]
                f = fit_t_function(0.0, g.length, vals[0], vals[-1])
                dev = max(dev, float(np.max(np.abs(vals - f(g.cumulative)))))
        secs = time.perf_counter() - t0
        good = est.is_exhaustive and est.delta == 0 and spread == 0 and dev == 0 and secs < 10
        ok &= good
        details.append(f"{sp.label}: delta={est.delta} tilde={spread} tdev={dev} {secs:.1f}s")
    report_criterion(1, ok, "; ".join(details))
    assert ok


# 2. cross

def test_criterion_2_cross(report_criterion, cross):
    Y = cross
    deg = np.diff(Y.graph().indptr)
    is_tree = Y.n_components == 1 and Y.n_edges == Y.n_nodes - 1
    four_arms = (deg == 1).sum() == 4 and (deg == 4).sum() == 1 and (deg > 2).sum() == 1
    est = product_delta(Y, n=Y.n_nodes)
    D = nx_all_pairs(Y)
    DM = np.array([[Y.dm(u, v) for v in range(Y.n_nodes)] for u in range(Y.n_nodes)])
    inner = np.array([Y.inner_distance(0, v) for v in range(Y.n_nodes)])
    exact = np.array_equal(D, DM) and np.array_equal(inner, DM[0])
    rep = factorization_check(Y, default_rays(Y, 10))
    classes_ok = rep["classes"] == 4 and rep["case2"] == 4 and rep["injective"] and \
        sorted(rep["factor_pairs"]) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    ok = is_tree and four_arms and est.is_exhaustive and est.delta == 0 and exact and classes_ok
    report_criterion(2, ok, f"nodes={Y.n_nodes} tree={is_tree} arms={four_arms} delta(Y)={est.delta} "
                            f"d==d_m:{exact} classes={rep['classes']} pairs={rep['factor_pairs']}")
    assert ok


# 3. diagonal

def test_criterion_3_diagonal(report_criterion, diagonal):
    Y = diagonal
    t = np.array([Y.point(u)[0] for u in range(Y.n_nodes)])
    dt = np.abs(t[:, None] - t[None, :])
    from scipy.sparse.csgraph import dijkstra
    dmax = dijkstra(Y.graph("max"), directed=True)
    deuc = dijkstra(Y.graph("euclidean"), directed=True)
    err_max = float(np.max(np.abs(dmax - dt)))
    err_euc = float(np.max(np.abs(deuc - math.sqrt(2) * dt)))
    spot = abs(Y.inner_distance((0.0, 0.0), (5.0, 5.0), "euclidean") - 5 * math.sqrt(2))
    rep = factorization_check(Y, default_rays(Y, 10))
    ok = err_max <= 1e-9 and err_euc <= 1e-9 and spot <= 1e-9 and rep["classes"] == 2 \
        and rep["case1"] == 1 and rep["case2"] == 1
    report_criterion(3, ok, f"max err={err_max:.2e} euclid err={err_euc:.2e} classes={rep['classes']} "
                            f"cases={rep['cases']}")
    assert ok


# 4. half-plane product

def test_criterion_4_halfplane_product(report_criterion):
    t0 = time.perf_counter()
    spec = load_product_spec(FIX / "halfplane_product.json")
    hp = spec.factor1
    assert spec.mesh <= 0.1 and tuple(hp.box_x) == (-5.0, 5.0)
    assert hp.box_y[0] == pytest.approx(math.exp(-2)) and hp.box_y[1] == pytest.approx(math.exp(2))
    Y = build_product(spec)
    dl, h = Y.delta, Y.h
    slack = 4 * h
    rows = [verify_pair(Y, u, v) for u, v in Y.sample_pairs(100, 0)]
    assert len(rows) == 100
    a = all(r["d_m"] <= r["d"] + 1e-9 and r["d"] <= r["d_m"] + 20 * dl + slack for r in rows)
    b = all(r["length_c"] <= r["d_m"] + 20 * dl + slack for r in rows)
    c = all(r["gap"] <= 8 * dl + slack for r in rows)
    fellow = max(r["fellow"] for r in rows)
    d = fellow <= 500 * dl + slack
    vals = [product_delta(Y, n=40, seed=s).delta for s in (0, 1, 2)]
    mean = float(np.mean(vals))
    e = all(math.isfinite(v) for v in vals) and max(abs(v - mean) for v in vals) <= 0.25 * mean
    secs = time.perf_counter() - t0
    ok = a and b and c and d and e and secs < 300
    report_criterion(4, ok,
                     f"delta_est={dl:.4f} h={h} (a) {a} max d-d_m={max(r['d'] - r['d_m'] for r in rows):.3f} "
                     f"(b) {b} max L-d_m={max(r['length_c'] - r['d_m'] for r in rows):.3f} "
                     f"(c) {c} max gap={max(r['gap'] for r in rows):.3f} "
                     f"(d) {d} fellow max={fellow:.3f} bound={500 * dl + slack:.1f} "
                     f"(e) {e} delta(Y)={[round(v, 4) for v in vals]} time={secs:.0f}s")
    assert ok


# 5. Morse

def test_criterion_5_morse(report_criterion, halfplane):
    counts = {}
    violations = 0
    # C40 with exhaustive delta, checked against the brute-force oracle
    c40 = load_space(FIX / "c40.json")
    dl40 = four_point_delta(c40, "all").delta
    assert dl40 == four_point_brute(floyd_warshall(c40.vertices, c40.edges)) == 10
    status = []
    for x, y, p, det in graph_detours(c40, sources=c40.vertices):
        R = min_distance_to_polyline(c40, p, det)
        v = morse_check(c40, det, x, y, p, MorseParams(R, dl40))
        status.append(v.status)
    counts["c40"] = {s: status.count(s) for s in set(status)}
    violations += status.count("bound_violated")
    # half-plane grid of rectangular detours
    dlh = four_point_delta(halfplane, "all", n=200, seed=0).delta
    status = []
    for x, y, p, det in uhp_detours(halfplane):
        R = min_distance_to_polyline(halfplane, p, det)
        status.append(morse_check(halfplane, det, x, y, p, MorseParams(R, dlh)).status)
    counts["halfplane"] = {s: status.count(s) for s in set(status)}
    violations += status.count("bound_violated")
    # every tree detour is precondition_unmet
    trees_unmet = True
    for name in TREE_FIXTURES:
        sp = load_space(FIX / name)
        for x, y, p, det in graph_detours(sp, sources=sp.vertices[:5]):
            R = min_distance_to_polyline(sp, p, det)
            trees_unmet &= morse_check(sp, det, x, y, p, MorseParams(R, 0.0)).status == "precondition_unmet"
    supplement = analytic_morse(dlh)
    ok = violations == 0 and trees_unmet
    admissible = sum(c.get("bound_holds", 0) + c.get("bound_violated", 0) for c in counts.values())
    report_criterion(5, ok, f"generated detours {counts}; admissible={admissible} violated={violations}; "
                            f"trees unmet={trees_unmet}; closed-form R=60 detour holds="
                            f"{supplement['holds']} margin={supplement['margin']:.3g}")
    assert ok


# 6. T-functions

SPACES_6 = TREE_FIXTURES + ["c4.json", "c40.json", "line.json", "segment10.json", "halfplane.json"]


def test_criterion_6_t_functions(report_criterion):
    details, ok = [], True
    for name in SPACES_6:
        sp = load_space(FIX / name)
        dl = four_point_delta(sp, "all", n=200, seed=0).delta
        worst, recs, _ = tcheck_checks(sp, dl, trials=50, seed=0, slack=SlackPolicy())
        dev_rec, rt_rec = recs
        good = dev_rec["verdict"] == "pass" and rt_rec["value"] <= 1e-12
        ok &= good
        details.append(f"{sp.label}: {worst:.3g}<={4 * dl + dev_rec['slack']:.3g} rt={rt_rec['value']:.1e}")
    report_criterion(6, ok, "; ".join(details))
    assert ok


# 7. determinism

def test_criterion_7_determinism(report_criterion, tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"{tag}.jsonl"
        res = subprocess.run([sys.executable, "-m", "hyprod.cli", "suite", "run", str(CONFIGS / "quick.json"),
                              "--output", str(out)], capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    report_criterion(7, ok, f"two runs of configs/quick.json, {len(outs[0])} bytes, identical={ok}")
    assert ok
