"""Desk-scale metric spaces with a common interface.

Four kinds are supported:

* ``FiniteGraph``   weighted undirected connected graph, vertex metric
* ``RegularTree``   finite k-ary tree of given depth and edge length
* ``Segment``       closed interval [lo, hi] of the real line
* ``UpperHalfPlane`` hyperbolic plane, with a sampling box and mesh h

Points are plain Python values: ``int`` vertex ids, ``float`` reals, or
``(x, y)`` tuples. Every space exposes ``distance``, ``distance_matrix``,
``geodesic``, ``sample_points`` and ``path_length``.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import DomainError, NoPathError

Point = Any

EXACT_TOL = 1e-9
EXACT_SLACK = 1e-6
GRAPH_SLACK = 1e-9
EXHAUSTIVE_MAX = 60

KINDS = ("FiniteGraph", "RegularTree", "Segment", "UpperHalfPlane")


@dataclass
class GeodesicPath:
    """Arclength-parameterized polyline.

    ``points[k]`` sits at arclength ``cumulative[k]``. Exact models also carry
    an ``evaluator`` so that ``at(t)`` is exact between samples; graph paths
    snap to the nearest vertex.
    """

    points: list
    cumulative: np.ndarray
    evaluator: Callable[[float], Point] | None = None

    def __post_init__(self):
        self.cumulative = np.asarray(self.cumulative, dtype=float)
        if len(self.points) != len(self.cumulative) or len(self.points) == 0:
            raise DomainError("points and cumulative lengths must match and be nonempty")

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    def at(self, t: float, tol: float = 1e-9) -> Point:
        L = self.length
        if t < -tol or t > L + tol * max(1.0, L):
            raise DomainError(f"parameter {t} outside [0, {L}]")
        t = min(max(t, 0.0), L)
        if self.evaluator is not None:
            if t == 0.0:
                return self.points[0]
            if t == L:
                return self.points[-1]
            return self.evaluator(t)
        return self.points[self.index_at(t)]

    def index_at(self, t: float) -> int:
        """Index of the sample nearest to arclength t (earlier one on ties)."""
        cum = self.cumulative
        k = int(np.searchsorted(cum, t))
        if k <= 0:
            return 0
        if k >= len(cum):
            return len(cum) - 1
        return k - 1 if t - cum[k - 1] <= cum[k] - t else k

    def sample(self, step: float):
        """Return ``(ts, points)`` at spacing at most ``step``."""
        if self.evaluator is None or self.length == 0.0:
            return self.cumulative.copy(), list(self.points)
        n = max(1, int(math.ceil(self.length / step - 1e-12)))
        ts = np.linspace(0.0, self.length, n + 1)
        return ts, [self.at(float(t)) for t in ts]

    def reversed(self) -> "GeodesicPath":
        L = self.length
        ev = None
        if self.evaluator is not None:
            f = self.evaluator
            ev = lambda t: f(L - t)  # noqa: E731
        return GeodesicPath(self.points[::-1], L - self.cumulative[::-1], ev)


class Space:
    """Base class. Subclasses set ``kind`` and implement the metric."""

    kind = ""
    label = ""
    mesh = 0.0  # 0 for models without a mesh parameter

    @property
    def is_exact(self) -> bool:
        return self.kind in ("Segment", "UpperHalfPlane")

    @property
    def slack(self) -> float:
        return EXACT_SLACK if self.is_exact else GRAPH_SLACK

    def contains(self, x) -> bool:
        raise NotImplementedError

    def check(self, x):
        if not self.contains(x):
            raise DomainError(f"point {x!r} is not in space {self.label!r}")
        return x

    def distance(self, x, y) -> float:
        raise NotImplementedError

    def distance_matrix(self, P: Sequence, Q: Sequence) -> np.ndarray:
        return np.array([[self.distance(p, q) for q in Q] for p in P], dtype=float)

    def geodesic(self, x, y) -> GeodesicPath:
        raise NotImplementedError

    def sample_points(self, n: int, seed: int) -> list:
        raise NotImplementedError

    def path_length(self, polyline: Sequence) -> float:
        if len(polyline) == 0:
            raise DomainError("empty polyline")
        return float(sum(self.distance(polyline[k], polyline[k + 1])
                         for k in range(len(polyline) - 1)))

    def distance_to_path(self, q, path: GeodesicPath) -> float:
        """Distance from q to the image of a geodesic path."""
        return min(self.distance(q, p) for p in path.points)


# -- graphs -----------------------------------------------------------------


class GraphSpace(Space):
    """Connected weighted graph with the shortest-path metric."""

    kind = "FiniteGraph"

    def __init__(self, vertices: Sequence[int], edges: Sequence, label: str = "graph"):
        self.label = label
        self.vertices = sorted(int(v) for v in vertices)
        if len(set(self.vertices)) != len(self.vertices) or not self.vertices:
            raise DomainError("vertex ids must be unique and nonempty")
        self.index = {v: i for i, v in enumerate(self.vertices)}
        adj: dict[int, dict[int, float]] = {v: {} for v in self.vertices}
        for e in edges:
            u, v, w = int(e[0]), int(e[1]), float(e[2]) if len(e) > 2 else 1.0
            if u not in adj or v not in adj:
                raise DomainError(f"edge ({u}, {v}) references an unknown vertex")
            if not w > 0 or not math.isfinite(w):
                raise DomainError(f"edge ({u}, {v}) has nonpositive weight {w}")
            if u == v:
                raise DomainError("self loops are not allowed")
            # parallel edges: keep the lightest
            w = min(w, adj[u].get(v, math.inf))
            adj[u][v] = w
            adj[v][u] = w
        self.adjacency = {v: sorted(nb.items()) for v, nb in adj.items()}
        ncomp, _ = connected_components(self.csr, directed=False)
        if ncomp != 1:
            raise DomainError(f"graph {label!r} is not connected ({ncomp} components)")
        self._trees: dict[int, tuple[dict, dict]] = {}

    @property
    def edges(self):
        return [(u, v, w) for u, nb in self.adjacency.items() for v, w in nb if u < v]

    @cached_property
    def csr(self) -> csr_matrix:
        n = len(self.vertices)
        rows, cols, ws = [], [], []
        for u, nb in self.adjacency.items():
            for v, w in nb:
                rows.append(self.index[u])
                cols.append(self.index[v])
                ws.append(w)
        return csr_matrix((ws, (rows, cols)), shape=(n, n))

    @cached_property
    def all_pairs(self) -> np.ndarray:
        return shortest_path(self.csr, method="D", directed=False)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def contains(self, x) -> bool:
        try:
            return int(x) == x and int(x) in self.index
        except (TypeError, ValueError):
            return False

    def distance(self, x, y) -> float:
        self.check(x)
        self.check(y)
        return float(self.all_pairs[self.index[int(x)], self.index[int(y)]])

    def distance_matrix(self, P, Q) -> np.ndarray:
        for p in list(P) + list(Q):
            self.check(p)
        ip = [self.index[int(p)] for p in P]
        iq = [self.index[int(q)] for q in Q]
        return self.all_pairs[np.ix_(ip, iq)]

    def dijkstra(self, source: int):
        """Single-source distances and tie-broken predecessors (cached)."""
        source = int(self.check(source))
        if source in self._trees:
            return self._trees[source]
        dist = {source: 0.0}
        pred: dict[int, int | None] = {source: None}
        done = set()
        heap = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in self.adjacency[u]:
                nd = d + w
                old = dist.get(v, math.inf)
                tol = 1e-12 * max(1.0, nd)
                if nd < old - tol:
                    dist[v] = nd
                    pred[v] = u
                    heapq.heappush(heap, (nd, v))
                elif abs(nd - old) <= tol and pred[v] is not None and u < pred[v]:
                    pred[v] = u
        self._trees[source] = (dist, pred)
        return dist, pred

    def geodesic(self, x, y) -> GeodesicPath:
        dist, pred = self.dijkstra(x)
        y = int(self.check(y))
        if y not in dist:
            raise NoPathError(f"no path from {x} to {y}")
        chain = [y]
        while pred[chain[-1]] is not None:
            chain.append(pred[chain[-1]])
        chain.reverse()
        cum = [0.0]
        for u, v in zip(chain, chain[1:]):
            cum.append(cum[-1] + dict(self.adjacency[u])[v])
        return GeodesicPath(chain, np.array(cum))

    def sample_points(self, n: int, seed: int) -> list:
        if n < 1:
            raise DomainError("n must be at least 1")
        if n >= self.n:
            return list(self.vertices)
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(self.n, size=n, replace=False))
        return [self.vertices[i] for i in idx]

    def neighbors(self, v) -> list:
        return self.adjacency[int(v)]

    def to_doc(self) -> dict:
        return {"kind": "FiniteGraph", "label": self.label, "vertices": list(self.vertices),
                "edges": [[u, v, w] for u, v, w in self.edges]}


class RegularTree(GraphSpace):
    """k-ary tree in heap numbering: children of v are k*v+1 .. k*v+k."""

    kind = "RegularTree"

    def __init__(self, branching: int, depth: int, edge_length: float = 1.0,
                 label: str = "tree"):
        if branching < 1 or depth < 0:
            raise DomainError("branching must be >= 1 and depth >= 0")
        self.branching, self.depth, self.edge_length = int(branching), int(depth), float(edge_length)
        k = self.branching
        n = depth + 1 if k == 1 else (k ** (depth + 1) - 1) // (k - 1)
        edges = [((v - 1) // k, v, edge_length) for v in range(1, n)]
        super().__init__(range(n), edges, label=label)

    def to_doc(self) -> dict:
        return {"kind": "RegularTree", "label": self.label, "branching": self.branching,
                "depth": self.depth, "edge_length": self.edge_length}


# -- continuous models ------------------------------------------------------


class Segment(Space):
    """The interval [lo, hi] with |x - y|."""

    kind = "Segment"

    def __init__(self, lo: float, hi: float, label: str = "segment"):
        if not lo < hi:
            raise DomainError("Segment needs lo < hi")
        self.lo, self.hi, self.label = float(lo), float(hi), label

    def contains(self, x) -> bool:
        try:
            x = float(x)
        except (TypeError, ValueError):
            return False
        tol = EXACT_TOL * max(1.0, abs(self.lo), abs(self.hi))
        return self.lo - tol <= x <= self.hi + tol

    def distance(self, x, y) -> float:
        return abs(float(self.check(x)) - float(self.check(y)))

    def distance_matrix(self, P, Q) -> np.ndarray:
        for p in list(P) + list(Q):
            self.check(p)
        return np.abs(np.asarray(P, float)[:, None] - np.asarray(Q, float)[None, :])

    def geodesic(self, x, y) -> GeodesicPath:
        x, y = float(self.check(x)), float(self.check(y))
        L = abs(y - x)
        s = 1.0 if y >= x else -1.0
        return GeodesicPath([x, y], np.array([0.0, L]), lambda t: x + s * t)

    def distance_to_path(self, q, path):
        lo, hi = sorted((path.points[0], path.points[-1]))
        q = float(q)
        return max(lo - q, q - hi, 0.0)

    def sample_points(self, n: int, seed: int) -> list:
        if n < 1:
            raise DomainError("n must be at least 1")
        rng = np.random.default_rng(seed)
        return [float(v) for v in rng.uniform(self.lo, self.hi, n)]

    def to_doc(self) -> dict:
        return {"kind": "Segment", "label": self.label, "lo": self.lo, "hi": self.hi}


def uhp_distance(x1, y1, x2, y2):
    """Hyperbolic distance in the upper half-plane (broadcasts)."""
    return 2.0 * np.arcsinh(np.hypot(x2 - x1, y2 - y1) / (2.0 * np.sqrt(y1 * y2)))


class UpperHalfPlane(Space):
    """Upper half-plane model of the hyperbolic plane.

    The sampling box only governs ``sample_points`` and meshing. Every point
    with positive vertical coordinate belongs to the space.
    """

    kind = "UpperHalfPlane"

    def __init__(self, box_x=(-5.0, 5.0), box_y=(math.exp(-2), math.exp(2)), h: float = 0.1,
                 headroom: float = 3.0, label: str = "uhp"):
        bx, by = tuple(map(float, box_x)), tuple(map(float, box_y))
        if not (bx[0] < bx[1] and 0 < by[0] < by[1]):
            raise DomainError("sampling box needs positive area and positive lower y")
        if not h > 0:
            raise DomainError("mesh size h must be positive")
        self.box_x, self.box_y, self.h, self.label = bx, by, float(h), label
        self.headroom = float(headroom)

    @property
    def mesh(self):
        return self.h

    def contains(self, p) -> bool:
        try:
            x, y = p
            return math.isfinite(x) and math.isfinite(y) and y > 0
        except (TypeError, ValueError):
            return False

    def in_box(self, p) -> bool:
        x, y = p
        t = EXACT_TOL
        return (self.box_x[0] - t <= x <= self.box_x[1] + t
                and self.box_y[0] * (1 - t) <= y <= self.box_y[1] * (1 + t))

    def distance(self, p, q) -> float:
        (x1, y1), (x2, y2) = self.check(p), self.check(q)
        return float(uhp_distance(x1, y1, x2, y2))

    def distance_matrix(self, P, Q) -> np.ndarray:
        for p in list(P) + list(Q):
            self.check(p)
        A = np.asarray(P, float).reshape(-1, 2)
        B = np.asarray(Q, float).reshape(-1, 2)
        return uhp_distance(A[:, None, 0], A[:, None, 1], B[None, :, 0], B[None, :, 1])

    def geodesic_evaluator(self, p, q):
        """Exact unit-speed parameterization of the geodesic from p to q."""
        (x1, y1), (x2, y2) = p, q
        scale = max(1.0, abs(x1), abs(x2))
        if abs(x2 - x1) <= 1e-14 * scale:
            sgn = 1.0 if y2 >= y1 else -1.0
            return lambda t: (x1, y1 * math.exp(sgn * t))
        c = ((x2 * x2 + y2 * y2) - (x1 * x1 + y1 * y1)) / (2.0 * (x2 - x1))
        r = math.hypot(x1 - c, y1)
        s1 = math.asinh((x1 - c) / y1)
        s2 = math.asinh((x2 - c) / y2)
        sgn = 1.0 if s2 >= s1 else -1.0

        def ev(t):
            s = s1 + sgn * t
            return (c + r * math.tanh(s), r / math.cosh(s))
        return ev

    def geodesic(self, p, q, step: float | None = None) -> GeodesicPath:
        p, q = tuple(map(float, self.check(p))), tuple(map(float, self.check(q)))
        L = self.distance(p, q)
        ev = self.geodesic_evaluator(p, q)
        step = self.h if step is None else step
        n = max(1, int(math.ceil(L / step - 1e-12))) if L > 0 else 1
        ts = np.linspace(0.0, L, n + 1) if L > 0 else np.array([0.0])
        pts = [p] + [ev(float(t)) for t in ts[1:-1]] + ([q] if L > 0 else [])
        return GeodesicPath(pts, ts, ev)

    def distance_to_path(self, q, path):
        from scipy.optimize import minimize_scalar
        L = path.length
        if L == 0 or path.evaluator is None:
            return min(self.distance(q, p) for p in path.points)
        f = lambda t: self.distance(q, path.at(t))  # noqa: E731
        res = minimize_scalar(f, bounds=(0.0, L), method="bounded",
                              options={"xatol": 1e-10 * max(1.0, L)})
        return float(min(res.fun, f(0.0), f(L)))

    def sample_points(self, n: int, seed: int) -> list:
        if n < 1:
            raise DomainError("n must be at least 1")
        rng = np.random.default_rng(seed)
        xs = rng.uniform(*self.box_x, n)
        ys = rng.uniform(*self.box_y, n)
        return [(float(a), float(b)) for a, b in zip(xs, ys)]

    def to_doc(self) -> dict:
        return {"kind": "UpperHalfPlane", "label": self.label,
                "box": {"x": list(self.box_x), "y": list(self.box_y)},
                "h": self.h, "headroom": self.headroom}


# -- loading ----------------------------------------------------------------


def _schema(name: str) -> dict:
    return json.loads((Path(__file__).parent / "schemas" / name).read_text())


def validate_doc(doc: dict, schema_name: str) -> None:
    """Validate against a shipped schema, raising ConfigError with all field paths."""
    import jsonschema

    from .errors import ConfigError
    v = jsonschema.Draft7Validator(_schema(schema_name))
    errs = sorted(v.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errs:
        fields = []
        for e in errs:
            path = "/".join(map(str, e.absolute_path))
            if e.validator == "required":
                missing = e.message.split("'")[1]
                path = f"{path}/{missing}" if path else missing
            fields.append(path or "<root>")
        raise ConfigError("; ".join(f"{f}: {e.message}" for f, e in zip(fields, errs)), fields)


def space_from_doc(doc: dict) -> Space:
    validate_doc(doc, "space.schema.json")
    kind, label = doc["kind"], doc.get("label", doc["kind"].lower())
    if kind == "FiniteGraph":
        sp = GraphSpace(doc["vertices"], doc["edges"], label=label)
    elif kind == "RegularTree":
        sp = RegularTree(doc["branching"], doc["depth"], doc.get("edge_length", 1.0), label=label)
    elif kind == "Segment":
        sp = Segment(doc["lo"], doc["hi"], label=label)
    else:
        box = doc["box"]
        sp = UpperHalfPlane(box["x"], box["y"], doc["h"], doc.get("headroom", 3.0), label=label)
    sp.doc = doc
    return sp


def load_space(source) -> Space:
    """Build a space from a dict, a JSON string path, or a Path."""
    if isinstance(source, Space):
        return source
    if isinstance(source, dict):
        return space_from_doc(source)
    path = Path(source)
    sp = space_from_doc(json.loads(path.read_text()))
    sp.source = str(path)
    return sp


def check_geodesic_path(space: Space, path: GeodesicPath, tol: float | None = None) -> float:
    """Largest mismatch between consecutive distances and cumulative increments."""
    cum = path.cumulative
    if cum[0] != 0.0 or np.any(np.diff(cum) < 0):
        raise DomainError("cumulative lengths must start at 0 and be nondecreasing")
    err = 0.0
    for k in range(len(path.points) - 1):
        err = max(err, abs(space.distance(path.points[k], path.points[k + 1]) - (cum[k + 1] - cum[k])))
    if tol is not None and err > tol:
        raise DomainError(f"path is not arclength-parameterized (error {err:.3g})")
    return err
