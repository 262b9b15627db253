"""Check drivers producing report records.

Every driver returns a list of record dicts (see ``make_record``) and, where
useful, plot series. The suite, the CLI and the acceptance tests share them.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .busemann import (BusemannField, b_ray_from, busemann_gromov_product, busemann_value,
                       field_from_doc, ideal_triangle_points)
from .errors import HyprodError
from .hyperbolicity import (MorseParams, distance_function_t_check, fit_t_function, four_point_delta,
                            morse_check, ray_comparison_sup, t_profile, tripod_decomposition)
from .spaces import GraphSpace, RegularTree, Space, UpperHalfPlane


@dataclass(frozen=True)
class SlackPolicy:
    exact: float = 1e-6
    graph: float = 1e-9
    mesh_factor: float = 4.0

    def for_space(self, space: Space) -> float:
        if space.mesh > 0:
            return self.mesh_factor * space.mesh
        return self.exact if space.is_exact else self.graph


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def digest(obj) -> str:
    blob = json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_record(check: str, anchor: str, inputs, value, bound, slack, verdict: str, **extra) -> dict:
    rec = {"check": check, "anchor": anchor, "inputs_digest": digest(inputs), "value": value,
           "bound": bound, "slack": slack, "verdict": verdict}
    if extra:
        rec["extra"] = extra
    return _plain(rec)


def series(name: str, columns, rows) -> dict:
    return _plain({"name": name, "columns": list(columns), "rows": rows})


def is_tree(space: Space) -> bool:
    return isinstance(space, RegularTree) or (isinstance(space, GraphSpace)
                                              and len(space.edges) == space.n - 1)


def _draw(space: Space, k: int, rng):
    if isinstance(space, GraphSpace):
        return [space.vertices[i] for i in rng.integers(0, space.n, k)]
    return space.sample_points(k, int(rng.integers(0, 2 ** 31)))


NOISE_FLOOR = 1e-9  # deltas below this are rounding noise


def _relative_spread(vals, rel: float, floor: float):
    """(max |v - mean| / mean, ok) with ok iff max |v - mean| <= rel * mean + floor."""
    mean = float(np.mean(vals))
    dev = max(abs(v - mean) for v in vals)
    return (dev / mean if mean > floor else 0.0), dev <= rel * mean + floor


# -- delta ------------------------------------------------------------------


def delta_checks(space: Space, seed: int = 0, n: int = 200, seeds=None, sweep=(25, 50, 100)):
    """Four-point and tilde-point delta; stability and convergence for sampled spaces."""
    recs, out = [], []
    est = four_point_delta(space, "all", n=n, seed=seed)
    inputs = {"space": space.label, "seed": seed, "n": n}
    if is_tree(space):
        verdict = "pass" if est.delta == 0 and est.tilde_delta == 0 else "fail"
        bound = 0.0
    else:
        verdict, bound = "info", None
    recs.append(make_record(f"delta/{space.label}", "four-point and tilde-point delta", inputs,
                            est.delta, bound, 0.0, verdict, **est.to_dict()))
    if not est.is_exhaustive:
        seeds = list(seeds) if seeds is not None else [seed, seed + 1, seed + 2]
        vals = [four_point_delta(space, "all", n=n, seed=s).delta for s in seeds]
        spread, ok = _relative_spread(vals, 0.20, NOISE_FLOOR)
        recs.append(make_record(f"delta-stability/{space.label}", "sampled delta stability",
                                {**inputs, "seeds": seeds}, spread, 0.20, NOISE_FLOOR,
                                "pass" if ok else "fail", deltas=vals))
        rows = [[m, four_point_delta(space, "all", n=m, seed=seed).delta] for m in sweep if m < n]
        rows.append([n, est.delta])
        out.append(series(f"delta_convergence:{space.label}", ["n", "delta_est"], rows))
    return est, recs, out


# -- tripods ----------------------------------------------------------------


def tripod_checks(space: Space, delta: float, seed: int = 0, triangles: int = 300,
                  slack: SlackPolicy = SlackPolicy(), exhaustive: bool = False):
    import itertools
    s = slack.for_space(space)
    rng = np.random.default_rng(seed)
    if exhaustive and isinstance(space, GraphSpace):
        tris = list(itertools.combinations(space.vertices, 3))
    else:
        tris = [tuple(_draw(space, 3, rng)) for _ in range(triangles)]
    spread, resid, neg, rays = 0.0, 0.0, 0.0, 0.0
    for k, (x, y, z) in enumerate(tris):
        t = tripod_decomposition(space, x, y, z)
        spread = max(spread, t.spread)
        resid = max(resid, abs(t.a + t.b - space.distance(x, y)), abs(t.a + t.c - space.distance(x, z)),
                    abs(t.b + t.c - space.distance(y, z)))
        neg = max(neg, -min(t.a, t.b, t.c))
        if k < 60:
            rays = max(rays, ray_comparison_sup(space, x, y, z))
    inputs = {"space": space.label, "seed": seed, "n": len(tris)}
    tol = 1e-9
    recs = [
        make_record(f"tripod/{space.label}", "tilde points pairwise <= 4 delta", inputs, spread,
                    4 * delta, s, "pass" if spread <= 4 * delta + s else "fail"),
        make_record(f"tripod-identity/{space.label}", "tripod lengths reproduce distances", inputs,
                    resid, 0.0, tol, "pass" if resid <= tol and neg <= tol else "fail", min_negative=neg),
        make_record(f"ray-comparison/{space.label}", "geodesics from a vertex 4 delta close up to a",
                    inputs, rays, 4 * delta, s, "pass" if rays <= 4 * delta + s else "fail"),
    ]
    return recs


# -- T-functions ------------------------------------------------------------


def tcheck_checks(space: Space, delta: float, trials: int = 50, seed: int = 0,
                  slack: SlackPolicy = SlackPolicy()):
    s = slack.for_space(space)
    rng = np.random.default_rng(seed)
    worst, worst_case, roundtrip = -1.0, None, 0.0
    for _ in range(trials):
        z, x, y = _draw(space, 3, rng)
        path = space.geodesic(x, y)
        dev = distance_function_t_check(space, z, path)
        ts, vals, model = t_profile(space, z, path)
        again = fit_t_function(*model.endpoints())
        roundtrip = max(roundtrip, max(abs(getattr(again, f) - getattr(model, f))
                                       for f in ("alpha", "omega", "a", "c", "t1", "t2")))
        if dev > worst:
            worst, worst_case = dev, (z, x, y, ts, vals, model)
    inputs = {"space": space.label, "seed": seed, "trials": trials}
    recs = [
        make_record(f"tcheck/{space.label}", "distance along a geodesic is a 4 delta T-function",
                    inputs, worst, 4 * delta, s, "pass" if worst <= 4 * delta + s else "fail",
                    witness={"z": worst_case[0], "x": worst_case[1], "y": worst_case[2]}),
        make_record(f"tfit-roundtrip/{space.label}", "T-function refit is idempotent", inputs,
                    roundtrip, 0.0, 1e-12, "pass" if roundtrip <= 1e-12 else "fail"),
    ]
    z, x, y, ts, vals, model = worst_case
    rows = [[float(t), float(v), float(model(t)), float(model(t)) + 4 * delta] for t, v in zip(ts, vals)]
    return worst, recs, [series(f"tdeviation:{space.label}", ["t", "d_z_gamma", "f", "f_plus_4delta"], rows)]


# -- Morse ------------------------------------------------------------------


def graph_detours(space: GraphSpace, sources=None):
    """(x, y, p, detour) with p the middle vertex of the x-y geodesic.

    The geodesic itself is always one detour. Further detours are shortest
    paths avoiding the open ball B(p, R) for R = 1, 2, ... edge lengths.
    """
    sources = [space.vertices[0]] if sources is None else sources
    step = min(w for _, _, w in space.edges)
    for x in sources:
        for y in space.vertices:
            if y == x:
                continue
            g = space.geodesic(x, y)
            p = g.points[len(g.points) // 2]
            yield x, y, p, list(g.points)
            dp = space.all_pairs[space.index[p]]
            R = step
            while R <= min(dp[space.index[x]], dp[space.index[y]]) + 1e-12:
                keep = np.flatnonzero(dp >= R - 1e-12)
                sub = space.csr[keep][:, keep]
                pos = {int(k): i for i, k in enumerate(keep)}
                d, pred = dijkstra(sub, directed=False, indices=pos[space.index[x]], return_predecessors=True)
                j = pos[space.index[y]]
                if not math.isfinite(d[j]):
                    break
                chain = [j]
                while chain[-1] != pos[space.index[x]]:
                    chain.append(int(pred[chain[-1]]))
                yield x, y, p, [space.vertices[keep[c]] for c in reversed(chain)]
                R += step


def uhp_detours(space: UpperHalfPlane, spans=(1.0, 2.0, 3.0, 4.0, 5.0), heights=(-2, -1, 0, 1, 2, 3),
                spacing: float = 0.5):
    """Rectangular polylines around geodesics between (-s, 1) and (s, 1)."""
    for s in spans:
        x, y = (-s, 1.0), (s, 1.0)
        p = (0.0, math.sqrt(1.0 + s * s))
        for k in heights:
            Y = math.exp(k)
            n = max(1, int(round(2 * s / spacing)))
            row = [(-s + 2 * s * i / n, Y) for i in range(n + 1)]
            pts = ([x] if Y != 1.0 else []) + row + ([y] if Y != 1.0 else [])
            yield x, y, p, pts


def analytic_morse(delta: float, rho: float = 60.0, s: float = 61.0) -> dict:
    """Closed-form detour in the hyperbolic plane around the point p at distance s
    from both ends of a geodesic: radial legs plus a half circle of radius rho."""
    d = 2 * s
    L = 2 * (s - rho) + math.pi * math.sinh(rho)
    params = MorseParams(rho, delta)
    bound = params.claimed_bound(d)
    return {"R": rho, "d": d, "length": L, "bound": bound, "admissible": params.admissible,
            "holds": L >= bound, "margin": L - bound}


def morse_checks(space: Space, delta: float, slack: SlackPolicy = SlackPolicy(), sources=None):
    """Run every generated detour; a failure is an admissible detour violating the bound."""
    if isinstance(space, GraphSpace):
        gen = graph_detours(space, sources)
    elif isinstance(space, UpperHalfPlane):
        gen = uhp_detours(space)
    else:
        return [], {}
    counts = {"total": 0, "precondition_unmet": 0, "bound_holds": 0, "bound_violated": 0}
    worst, best_margin = None, math.inf
    for x, y, p, det in gen:
        R = max(0.0, _min_dist(space, p, det))
        v = morse_check(space, det, x, y, p, MorseParams(R, delta))
        counts["total"] += 1
        counts[v.status] += 1
        if v.status == "bound_violated" and worst is None:
            worst = v.witness
        if v.status != "precondition_unmet":
            best_margin = min(best_margin, v.margin)
    inputs = {"space": space.label, "delta": delta}
    recs = [make_record(f"morse/{space.label}", "detours avoiding B(p,R), R > 90 delta, are long",
                        inputs, counts["bound_violated"], 0, 0, "fail" if counts["bound_violated"] else "pass",
                        counts=counts, admissible=counts["bound_holds"] + counts["bound_violated"],
                        min_margin=best_margin if math.isfinite(best_margin) else None,
                        witness=worst)]
    if isinstance(space, UpperHalfPlane):
        a = analytic_morse(delta)
        recs.append(make_record(f"morse-analytic/{space.label}", "closed-form circular detour",
                                {**inputs, "R": a["R"]}, a["length"], a["bound"], 0.0,
                                "pass" if a["admissible"] and a["holds"] else "fail",
                                **{k: v for k, v in a.items() if k != "bound"}))
    return recs, counts


def _min_dist(space, p, det):
    from .hyperbolicity import min_distance_to_polyline
    return min_distance_to_polyline(space, p, det)


# -- Busemann ---------------------------------------------------------------


def busemann_checks(space: Space, field: BusemannField, delta: float, seed: int = 0,
                    n: int = 30, slack: SlackPolicy = SlackPolicy()):
    s = slack.for_space(space)
    rng = np.random.default_rng(seed)
    pts = _draw(space, 2 * n, rng)
    lip, bg, rate, spread, fellow, tdev = 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    usable = []
    for q in pts:
        try:
            busemann_value(field, q)
            usable.append(q)
        except HyprodError:
            pass
    for x, y in zip(usable[::2], usable[1::2]):
        d = space.distance(x, y)
        lip = max(lip, abs(busemann_value(field, x) - busemann_value(field, y)) - d)
        a, b = busemann_gromov_product(field, x, y)
        bg = max(bg, abs(a + b - d))
        try:
            ray = b_ray_from(field, x, 1.0, allow_short=True)
            ts, rp = (ray.sample(0.05) if ray.evaluator is not None else (ray.cumulative, ray.points))
            b0 = busemann_value(field, x)
            rate = max(rate, max(abs(busemann_value(field, q) - b0 + t) for t, q in zip(ts, rp)))
            it = ideal_triangle_points(field, x, y)
            spread = max(spread, it.spread)
            fellow = max(fellow, it.fellow_sup)
        except HyprodError:
            continue
        g = space.geodesic(x, y)
        ts2, gp = g.sample(space.mesh or max(g.length / 64, 1e-3)) if space.is_exact else (g.cumulative, g.points)
        vals = np.array([busemann_value(field, q) for q in gp])
        model = fit_t_function(0.0, g.length, vals[0], vals[-1])
        tdev = max(tdev, float(np.max(np.abs(vals - model(np.asarray(ts2))))))
    inputs = {"space": space.label, "seed": seed, "n": len(usable) // 2}
    t = field.tolerance
    return [
        make_record(f"busemann-lipschitz/{space.label}", "B is 1-Lipschitz", inputs, lip, 0.0, t,
                    "pass" if lip <= t else "fail"),
        make_record(f"busemann-product/{space.label}", "a + b = d(x, y)", inputs, bg, 0.0, 1e-9,
                    "pass" if bg <= 1e-9 else "fail"),
        make_record(f"busemann-ray/{space.label}", "B drops at unit rate along B-rays", inputs, rate, 0.0,
                    t + s, "pass" if rate <= t + s else "fail"),
        make_record(f"ideal-triangle/{space.label}", "ideal tripod points pairwise <= 8 delta", inputs,
                    spread, 8 * delta, s, "pass" if spread <= 8 * delta + s else "fail"),
        make_record(f"ideal-fellow/{space.label}", "B-rays past a, b stay 8 delta close", inputs,
                    fellow, 8 * delta, s, "pass" if fellow <= 8 * delta + s else "fail"),
        make_record(f"busemann-t/{space.label}", "B along geodesics is a 4 delta T-function", inputs,
                    tdev, 4 * delta, s, "pass" if tdev <= 4 * delta + s else "fail"),
    ]


# -- products ---------------------------------------------------------------


def product_checks(Y, n_pairs: int = 20, seed: int = 0, delta_n: int = 30, seeds=None,
                   n_samples: int = 16):
    from .product import metric_comparison, product_delta, verify_pair
    dl, s = Y.delta, Y.slack
    label = Y.spec.label
    base = {"product": label, "seed": seed}
    recs, out = [], []
    recs.append(make_record(f"product-build/{label}", "plumbing", base, Y.n_nodes, None, 0,
                            "pass" if Y.n_components == 1 else "fail", **Y.summary()))
    pairs = Y.sample_pairs(n_pairs, seed) if Y.n_nodes > 1 else []
    rows = [verify_pair(Y, u, v, n_samples=n_samples) for u, v in pairs]
    excess = max((r["d"] - r["d_m"] for r in rows), default=0.0)
    keys = [
        ("lower", "d_m <= d", lambda r: r["d_m"] - r["d"], 0.0, 1e-9),
        ("upper", "d <= d_m + 20 delta", lambda r: r["d"] - r["d_m"], 20 * dl, s),
        ("length_c", "continuous curve length <= d_m + 20 delta", lambda r: r["length_c"] - r["d_m"], 20 * dl, s),
        ("gap", "jump of the split curve <= 8 delta", lambda r: r["gap"], 8 * dl, s),
        ("bridges", "bridge lengths <= 8 delta", lambda r: max(r["bridge_lengths"], default=0.0), 8 * dl, s),
        ("fellow", "shortest path within 500 delta of the reparameterized curve", lambda r: r["fellow"], 500 * dl, s),
    ]
    for key, anchor, fn, bound, sl in keys:
        vals = [fn(r) for r in rows]
        v = max(vals, default=0.0)
        bad = [r for r, x in zip(rows, vals) if x > bound + sl]
        wit = {k: bad[0][k] for k in ("u", "v", "p", "q")} if bad else None
        recs.append(make_record(f"product-{key}/{label}", anchor, {**base, "pairs": n_pairs}, v, bound, sl,
                                "fail" if bad else "pass", witness=wit))
    recs.append(make_record(f"product-witness/{label}", "fellow-travel intermediate witnesses",
                            {**base, "pairs": n_pairs},
                            max((r["witness_big"] for r in rows), default=0.0), 30 * dl, s,
                            "pass" if all(r["witness_big"] <= 30 * dl + s and r["witness_small"] <= 100 * dl + s
                                          for r in rows) else "fail",
                            witness_small=max((r["witness_small"] for r in rows), default=0.0),
                            bound_small=100 * dl))
    if rows:
        worst = max(rows, key=lambda r: r["fellow"])
        out.append(series(f"fellow:{label}", ["t", "gap"], worst["_series"]))
    mc = metric_comparison(Y, pairs=pairs[: min(len(pairs), 20)], seed=seed)
    recs.append(make_record(f"product-flavor/{label}", "max and euclidean inner metrics within sqrt 2",
                            base, None, math.sqrt(2), 1e-9, "pass" if mc["flavor_ok"] else "fail"))
    recs.append(make_record(f"product-topology/{label}", "small d_m balls have small d diameter",
                            base, [b["sup_d"] for b in mc["balls"]], None, s,
                            "pass" if mc["ball_ok"] else "fail", balls=mc["balls"]))
    seeds = list(seeds) if seeds is not None else [seed, seed + 1, seed + 2]
    ests = [product_delta(Y, n=delta_n, seed=sd) for sd in seeds]
    vals = [e.delta for e in ests]
    finite = all(math.isfinite(v) for v in vals)
    spread, ok = _relative_spread(vals, 0.25, NOISE_FLOOR) if finite else (math.inf, False)
    recs.append(make_record(f"product-delta/{label}", "four-point delta of Y", {**base, "seeds": seeds,
                            "n": delta_n}, vals, None, 0.25, "pass" if ok else "fail",
                            relative_spread=spread, estimates=[e.to_dict() for e in ests]))
    jump = max(e.jump_max for e in ests)
    recs.append(make_record(f"product-jump/{label}", "jump at a* <= 8 delta", {**base, "seeds": seeds},
                            jump, 8 * dl, s, "pass" if jump <= 8 * dl + s else "fail",
                            t_deviation=max(e.t_deviation for e in ests)))
    consts = {"delta_factors": [Y.delta1, Y.delta2], "delta_Y": vals, "max_d_minus_dm": excess,
              "fellow_sup": max((r["fellow"] for r in rows), default=0.0)}
    return recs, out, consts


def default_rays(Y, K: int):
    """Sign rays from the origin for line x line products."""
    from .spaces import Segment
    if not (isinstance(Y.m1.space, Segment) and isinstance(Y.m2.space, Segment)):
        return []
    z = Y.point(Y.locate((0.0, 0.0)))
    rays = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            pts = [(z[0] + s1 * k, z[1] + s2 * k) for k in range(K + 1)]
            try:
                nodes = [Y.node_of(Y.m1.locate(a), Y.m2.locate(b)) for a, b in pts]
            except HyprodError:
                continue
            rays.append(nodes)
    return rays


def boundary_checks(Y, rays, K: int, lam: float = 0.5, expected: int | None = None):
    from .boundary import factorization_check
    label = Y.spec.label
    rep = factorization_check(Y, rays, lam)
    ok = rep["injective"] and rep["case1_collapse"] and rep["all_converge"] and rep.get("halving_stable", True)
    if expected is not None:
        ok = ok and rep["classes"] == expected
    return [make_record(f"boundary/{label}", "boundary classes factor through the factor boundaries",
                        {"product": label, "K": K, "lam": lam, "rays": rays}, rep["classes"], expected, 0,
                        "pass" if ok else "fail", **{k: v for k, v in rep.items() if k != "labels"})]
