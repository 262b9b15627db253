"""Level-set products of two hyperbolic spaces and their quasi-geodesics.

The product Y is the set of pairs (x1, x2) whose levels agree, where the
level is a Busemann function (``mode="busemann"``) or the distance to a
basepoint (``mode="basepoint"``). Y is discretized as a graph: nodes are
pairs of factor mesh points with levels within ``epsilon``, edges join
strong-product neighbours, and weights are the max (``flavor="max"``) or
root-sum-square (``flavor="euclidean"``) of the factor edge lengths.

The curve constructions work with exact factor geometry where the factors
are continuous. Only inner distances and shortest paths use the graph.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .busemann import BusemannField, b_ray_from, field_from_doc
from .errors import DiscretizationError, DomainError, NoPathError, TruncatedRayError
from .hyperbolicity import DeltaEstimate, fit_t_function, four_point_delta, four_point_from_matrix
from .spaces import GeodesicPath, GraphSpace, Segment, Space, UpperHalfPlane, load_space, uhp_distance, validate_doc

FLAVORS = ("max", "euclidean")


@dataclass(frozen=True)
class ProductSpec:
    factor1: Space
    factor2: Space
    mode: str = "basepoint"
    basepoints: tuple | None = None
    fields: tuple | None = None
    flavor: str = "max"
    mesh: float = 0.25
    epsilon: float | None = None  # defaults to mesh / 2
    delta: float | None = None  # factor delta override
    delta_samples: int = 200
    delta_seed: int = 0
    label: str = "product"

    def __post_init__(self):
        if self.mode not in ("basepoint", "busemann"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.flavor not in FLAVORS:
            raise DomainError(f"unknown flavor {self.flavor!r}")
        if not self.mesh > 0:
            raise DomainError("mesh must be positive")
        if self.epsilon is not None and not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.mode == "basepoint":
            if self.basepoints is None or len(self.basepoints) != 2:
                raise DomainError("basepoint mode needs two basepoints")
            self.factor1.check(self.basepoints[0])
            self.factor2.check(self.basepoints[1])
        else:
            if self.fields is None or len(self.fields) != 2:
                raise DomainError("busemann mode needs two fields")
            for f, sp in zip(self.fields, (self.factor1, self.factor2)):
                if f.space is not sp:
                    raise DomainError("field does not belong to its factor")

    @property
    def eps(self) -> float:
        return self.epsilon if self.epsilon is not None else 0.5 * self.mesh


def _factor_point(space, v):
    if isinstance(space, UpperHalfPlane):
        return (float(v[0]), float(v[1]))
    if isinstance(space, GraphSpace):
        return int(v)
    return float(v)


def load_product_spec(source) -> ProductSpec:
    """Read a product document; factor entries are paths (relative to it) or inline docs."""
    base = Path(".")
    if isinstance(source, dict):
        doc = source
    else:
        base = Path(source).parent
        doc = json.loads(Path(source).read_text())
    validate_doc(doc, "product.schema.json")
    facs = []
    for key in ("factor1", "factor2"):
        ref = doc[key]
        if isinstance(ref, str):
            p = (base / ref) if not Path(ref).is_absolute() else Path(ref)
            if not p.exists():
                raise FileNotFoundError(str(p))
            facs.append(load_space(p))
        else:
            facs.append(load_space(ref))
    if doc["factor1"] == doc["factor2"]:
        # distinct objects keep the factor roles apart
        facs[1] = load_space(facs[1].doc)
    kw = dict(mode=doc["mode"], flavor=doc.get("flavor", "max"), mesh=doc["mesh"],
              epsilon=doc.get("epsilon"), delta=doc.get("delta"),
              delta_samples=doc.get("delta_samples", 200), delta_seed=doc.get("delta_seed", 0),
              label=doc.get("label", "product"))
    if doc["mode"] == "basepoint":
        z = tuple(_factor_point(sp, v) for sp, v in zip(facs, doc["basepoints"]))
        return ProductSpec(facs[0], facs[1], basepoints=z, **kw)
    fields = []
    for sp in facs:
        if "busemann" not in getattr(sp, "doc", {}):
            raise DomainError(f"factor {sp.label!r} has no busemann block")
        fields.append(field_from_doc(sp, sp.doc["busemann"]))
    return ProductSpec(facs[0], facs[1], fields=tuple(fields), **kw)


# -- factor roles -----------------------------------------------------------


class _Role:
    """Level function and descending rays of one factor."""

    def __init__(self, space: Space, z=None, field: BusemannField | None = None):
        self.space, self.z, self.field = space, z, field

    def level(self, x) -> float:
        if self.field is not None:
            return self.field(x)
        return self.space.distance(self.z, x)

    def levels(self, pts) -> np.ndarray:
        if self.field is not None:
            return self.field.values(pts)
        return self.space.distance_matrix([self.z], pts)[0]

    def ray(self, x, length: float) -> GeodesicPath:
        """Descending ray from x; may be shorter than asked (callers check)."""
        if self.field is not None:
            return b_ray_from(self.field, x, max(length, 1e-12), allow_short=True)
        return self.space.geodesic(x, self.z)


def _ray_at(ray: GeodesicPath, t: float, what: str):
    if t > ray.length + 1e-9 * max(1.0, ray.length):
        raise TruncatedRayError(f"{what} needs parameter {t:.6g} beyond ray length {ray.length:.6g}",
                                ray.length)
    return ray.at(min(max(t, 0.0), ray.length))


# -- factor meshes ----------------------------------------------------------


@dataclass
class FactorMesh:
    space: Space
    points: list
    nbr: np.ndarray  # (n, slots) neighbour index, slot 0 is the node itself, -1 pads
    wts: np.ndarray  # matching edge lengths
    levels: np.ndarray
    in_box: np.ndarray
    grid: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.points)

    def locate(self, x) -> int:
        sp, g = self.space, self.grid
        if isinstance(sp, GraphSpace):
            return sp.index[int(sp.check(x))]
        if isinstance(sp, Segment):
            k = int(round((float(x) - g["lo"]) / g["h"]))
            if not 0 <= k < self.n:
                raise DomainError(f"{x} is outside the mesh")
            return k
        x0, y0 = sp.check(x)
        i = int(round((x0 - g["x0"]) / g["h"]))
        r = int(round((math.log(y0) - g["ly0"]) / g["h"]))
        if not (0 <= i < g["nx"]) or r < 0:
            raise DomainError(f"{x} is outside the mesh")
        if r >= g["ny"]:
            raise TruncatedRayError(f"{x} lies above the mesh headroom", float("nan"))
        return i * g["ny"] + r

    def consecutive(self, pts) -> np.ndarray:
        """Factor distances between consecutive points of a list."""
        sp = self.space
        if len(pts) < 2:
            return np.zeros(0)
        if isinstance(sp, UpperHalfPlane):
            a = np.asarray(pts, float)
            return uhp_distance(a[:-1, 0], a[:-1, 1], a[1:, 0], a[1:, 1])
        if isinstance(sp, Segment):
            return np.abs(np.diff(np.asarray(pts, float)))
        idx = [sp.index[int(v)] for v in pts]
        return sp.all_pairs[idx[:-1], idx[1:]]


def build_mesh(space: Space, h: float, role: _Role) -> FactorMesh:
    grid = {}
    if isinstance(space, GraphSpace):
        pts = list(space.vertices)
        deg = max(len(space.neighbors(v)) for v in pts)
        nbr = -np.ones((len(pts), deg + 1), dtype=np.int64)
        wts = np.zeros((len(pts), deg + 1))
        for k, v in enumerate(pts):
            nbr[k, 0] = k
            for s, (u, w) in enumerate(space.neighbors(v), start=1):
                nbr[k, s] = space.index[u]
                wts[k, s] = w
        in_box = np.ones(len(pts), bool)
    elif isinstance(space, Segment):
        n = int(round((space.hi - space.lo) / h)) + 1
        if abs(space.lo + (n - 1) * h - space.hi) > 1e-9 * max(1.0, abs(space.hi)):
            raise DiscretizationError(f"mesh {h} does not divide segment length {space.hi - space.lo}")
        pts = [space.lo + k * h for k in range(n)]
        k = np.arange(n)
        nbr = np.stack([k, k - 1, k + 1], axis=1)
        nbr[0, 1] = -1
        nbr[-1, 2] = -1
        arr = np.asarray(pts)
        wts = np.zeros((n, 3))
        wts[1:, 1] = np.abs(arr[1:] - arr[:-1])
        wts[:-1, 2] = np.abs(arr[1:] - arr[:-1])
        in_box = np.ones(n, bool)
        grid = {"lo": space.lo, "h": h}
    elif isinstance(space, UpperHalfPlane):
        (xa, xb), (ya, yb) = space.box_x, space.box_y
        nx = int(round((xb - xa) / h)) + 1
        ly0 = math.log(ya)
        ny_box = int(round((math.log(yb) - ly0) / h)) + 1
        ny = ny_box + int(math.ceil(space.headroom / h - 1e-9))
        xs = xa + np.arange(nx) * h
        ys = np.exp(ly0 + np.arange(ny) * h)
        X = np.repeat(xs, ny)
        Yv = np.tile(ys, nx)
        n = nx * ny
        pts = list(zip(X.tolist(), Yv.tolist()))
        I = np.repeat(np.arange(nx), ny)
        R = np.tile(np.arange(ny), nx)
        moves = [(0, 0)] + [(di, dr) for di in (-1, 0, 1) for dr in (-1, 0, 1) if (di, dr) != (0, 0)]
        nbr = -np.ones((n, len(moves)), dtype=np.int64)
        wts = np.zeros((n, len(moves)))
        for s, (di, dr) in enumerate(moves):
            ii, rr = I + di, R + dr
            ok = (ii >= 0) & (ii < nx) & (rr >= 0) & (rr < ny)
            tgt = ii * ny + rr
            nbr[ok, s] = tgt[ok]
            wts[ok, s] = uhp_distance(X[ok], Yv[ok], X[tgt[ok]], Yv[tgt[ok]])
        in_box = R < ny_box
        grid = {"x0": xa, "ly0": ly0, "h": h, "nx": nx, "ny": ny, "ny_box": ny_box}
    else:
        raise DomainError(f"cannot mesh space kind {space.kind}")
    levels = np.asarray(role.levels(pts), dtype=float)
    return FactorMesh(space, pts, nbr, wts, levels, in_box, grid)


# -- the product space ------------------------------------------------------


class ProductSpace:
    """Discretized product with on-demand Dijkstra inner distances."""

    def __init__(self, spec: ProductSpec, mesh1: FactorMesh, mesh2: FactorMesh, roles,
                 node_i, node_j, edges, delta1: float, delta2: float):
        self.spec, self.m1, self.m2, self.roles = spec, mesh1, mesh2, roles
        self.node_i, self.node_j = node_i, node_j
        self.keys = node_i * mesh2.n + node_j
        self.eu, self.ev, self.w1, self.w2 = edges
        self.delta1, self.delta2 = delta1, delta2
        self._graphs = {}
        self._cache: OrderedDict = OrderedDict()

    # basic facts
    @property
    def n_nodes(self) -> int:
        return len(self.keys)

    @property
    def n_edges(self) -> int:
        return len(self.eu)

    @property
    def delta(self) -> float:
        return max(self.delta1, self.delta2)

    @property
    def h(self) -> float:
        return self.spec.mesh

    @property
    def slack(self) -> float:
        return 4.0 * self.spec.mesh

    @property
    def flavor(self) -> str:
        return self.spec.flavor

    def graph(self, flavor: str | None = None):
        flavor = flavor or self.flavor
        if flavor not in self._graphs:
            w = np.maximum(self.w1, self.w2) if flavor == "max" else np.hypot(self.w1, self.w2)
            n = self.n_nodes
            G = coo_matrix((np.concatenate([w, w]),
                            (np.concatenate([self.eu, self.ev]), np.concatenate([self.ev, self.eu]))),
                           shape=(n, n)).tocsr()
            self._graphs[flavor] = G
        return self._graphs[flavor]

    @property
    def n_components(self) -> int:
        return int(connected_components(self.graph(), directed=False)[0])

    def levels(self, u):
        return float(self.m1.levels[self.node_i[u]]), float(self.m2.levels[self.node_j[u]])

    def point(self, u):
        return (self.m1.points[self.node_i[u]], self.m2.points[self.node_j[u]])

    def node_of(self, i: int, j: int) -> int:
        key = i * self.m2.n + j
        pos = int(np.searchsorted(self.keys, key))
        if pos >= len(self.keys) or self.keys[pos] != key:
            raise DomainError(f"mesh pair ({i}, {j}) is not a node of Y")
        return pos

    def locate(self, pt) -> int:
        """Node nearest to a product point: exact cell if it is a node, else the
        level-compatible factor-2 point closest to pt[1]."""
        i = self.m1.locate(pt[0])
        j = self.m2.locate(pt[1])
        key = i * self.m2.n + j
        pos = int(np.searchsorted(self.keys, key))
        if pos < len(self.keys) and self.keys[pos] == key:
            return pos
        lo = int(np.searchsorted(self.keys, i * self.m2.n))
        hi = int(np.searchsorted(self.keys, (i + 1) * self.m2.n))
        if lo == hi:
            raise DiscretizationError(f"no node of Y above factor point {pt[0]!r}", pt)
        cand = self.node_j[lo:hi]
        d = self.m2.space.distance_matrix([pt[1]], [self.m2.points[c] for c in cand])[0]
        return lo + int(np.argmin(d))

    def resolve(self, p) -> int:
        if isinstance(p, (int, np.integer)):
            if not 0 <= int(p) < self.n_nodes:
                raise DomainError(f"node {p} out of range")
            return int(p)
        return self.locate(p)

    # distances
    def factor_distances(self, u, v):
        p, q = self.point(u), self.point(v)
        return self.m1.space.distance(p[0], q[0]), self.m2.space.distance(p[1], q[1])

    def dm(self, u, v) -> float:
        return max(self.factor_distances(u, v))

    def de(self, u, v) -> float:
        d1, d2 = self.factor_distances(u, v)
        return math.hypot(d1, d2)

    def point_dm(self, p, q) -> float:
        return max(self.m1.space.distance(p[0], q[0]), self.m2.space.distance(p[1], q[1]))

    def dm_to_all(self, u) -> np.ndarray:
        p = self.point(u)
        d1 = self.m1.space.distance_matrix([p[0]], self.m1.points)[0][self.node_i]
        d2 = self.m2.space.distance_matrix([p[1]], self.m2.points)[0][self.node_j]
        return np.maximum(d1, d2)

    def sssp(self, source: int, flavor: str | None = None):
        """Full single-source distances and predecessors (small LRU cache)."""
        key = (int(source), flavor or self.flavor)
        if key in self._cache:
            self._cache.move_to_end(key)
            return self._cache[key]
        d, pred = dijkstra(self.graph(key[1]), directed=True, indices=key[0], return_predecessors=True)
        self._cache[key] = (d, pred)
        if len(self._cache) > 6:
            self._cache.popitem(last=False)
        return d, pred

    def inner_distance(self, p, q, flavor: str | None = None) -> float:
        u, v = self.resolve(p), self.resolve(q)
        d = float(self.sssp(u, flavor)[0][v])
        if not math.isfinite(d):
            raise NoPathError(f"nodes {u} and {v} lie in different components of Y")
        return d

    def local_distance(self, u: int, v: int, guess: float) -> float:
        """Inner distance by radius-limited Dijkstra, widening until v is reached."""
        if u == v:
            return 0.0
        # d is usually close to d_m, so start tight and widen
        pad = 4.0 * self.h
        for _ in range(40):
            d = dijkstra(self.graph(), directed=True, indices=u, limit=1.05 * guess + pad)
            if math.isfinite(d[v]):
                return float(d[v])
            pad *= 2.0
        raise NoPathError(f"nodes {u} and {v} are not connected")

    def shortest_path(self, p, q):
        u, v = self.resolve(p), self.resolve(q)
        d, pred = self.sssp(u)
        if not math.isfinite(d[v]):
            raise NoPathError(f"nodes {u} and {v} lie in different components of Y")
        chain = [v]
        while chain[-1] != u:
            chain.append(int(pred[chain[-1]]))
        chain.reverse()
        return chain, d[chain]

    def sample_nodes(self, n: int, seed: int) -> np.ndarray:
        pool = np.flatnonzero(self.m1.in_box[self.node_i] & self.m2.in_box[self.node_j])
        if n >= len(pool):
            return pool
        rng = np.random.default_rng(seed)
        return np.sort(rng.choice(pool, size=n, replace=False))

    def sample_pairs(self, n: int, seed: int):
        pool = np.flatnonzero(self.m1.in_box[self.node_i] & self.m2.in_box[self.node_j])
        rng = np.random.default_rng(seed)
        out = []
        while len(out) < n:
            u, v = rng.choice(pool, size=2, replace=False)
            out.append((int(u), int(v)))
        return out

    def mesh_formula_count(self) -> int | None:
        """Node count expected from the grid formula for two identical half-plane
        factors with shared vertical levels (equal Busemann origins)."""
        g1, g2 = self.m1.grid, self.m2.grid
        if "nx" in g1 and "nx" in g2 and self.spec.mode == "busemann" and g1 == g2:
            return g1["nx"] * g2["nx"] * g1["ny"]
        return None

    def summary(self) -> dict:
        return {"label": self.spec.label, "mode": self.spec.mode, "flavor": self.flavor,
                "nodes": self.n_nodes, "edges": self.n_edges, "components": self.n_components,
                "mesh": self.h, "epsilon": self.spec.eps, "delta1": self.delta1,
                "delta2": self.delta2}

    def export_edges(self, path, flavor: str | None = None) -> None:
        flavor = flavor or self.flavor
        w = np.maximum(self.w1, self.w2) if flavor == "max" else np.hypot(self.w1, self.w2)
        with open(path, "w") as fh:
            fh.write("# u,v,weight,flavor\n")
            for a, b, c in zip(self.eu.tolist(), self.ev.tolist(), w.tolist()):
                fh.write(f"{a},{b},{c!r},{flavor}\n")


def _factor_delta(space: Space, spec: ProductSpec) -> float:
    if spec.delta is not None:
        return float(spec.delta)
    return four_point_delta(space, "all", n=spec.delta_samples, seed=spec.delta_seed).delta


def build_product(spec: ProductSpec) -> ProductSpace:
    if spec.mode == "basepoint":
        roles = (_Role(spec.factor1, z=spec.basepoints[0]), _Role(spec.factor2, z=spec.basepoints[1]))
    else:
        roles = (_Role(spec.factor1, field=spec.fields[0]), _Role(spec.factor2, field=spec.fields[1]))
    m1 = build_mesh(spec.factor1, spec.mesh, roles[0])
    m2 = build_mesh(spec.factor2, spec.mesh, roles[1])
    eps = spec.eps
    l1, l2 = m1.levels, m2.levels
    ok2 = np.flatnonzero(np.isfinite(l2))
    order = ok2[np.argsort(l2[ok2], kind="stable")]
    sl2 = l2[order]
    fuzz = 1e-12 * max(1.0, float(np.nanmax(np.abs(l1))) if np.isfinite(l1).any() else 1.0)
    good1 = np.flatnonzero(np.isfinite(l1))
    lo = np.searchsorted(sl2, l1[good1] - eps - fuzz, side="left")
    hi = np.searchsorted(sl2, l1[good1] + eps + fuzz, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        raise DiscretizationError(f"empty level set at epsilon={eps:g}; try a larger epsilon")
    node_i = np.repeat(good1, counts)
    starts = np.repeat(lo - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    node_j = order[np.arange(total) + starts]
    keys = node_i * m2.n + node_j
    srt = np.argsort(keys, kind="stable")
    node_i, node_j, keys = node_i[srt], node_j[srt], keys[srt]

    eu, ev, w1s, w2s = [], [], [], []
    src = np.arange(total)
    for s1 in range(m1.nbr.shape[1]):
        a1 = m1.nbr[node_i, s1]
        wa = m1.wts[node_i, s1]
        for s2 in range(m2.nbr.shape[1]):
            if s1 == 0 and s2 == 0:
                continue
            a2 = m2.nbr[node_j, s2]
            valid = (a1 >= 0) & (a2 >= 0)
            key = a1 * m2.n + a2
            pos = np.searchsorted(keys, key)
            pos = np.minimum(pos, total - 1)
            hit = valid & (keys[pos] == key) & (pos > src)
            eu.append(src[hit])
            ev.append(pos[hit])
            w1s.append(wa[hit])
            w2s.append(m2.wts[node_j[hit], s2])
    edges = tuple(np.concatenate(x) for x in (eu, ev, w1s, w2s))
    d1 = _factor_delta(spec.factor1, spec)
    d2 = _factor_delta(spec.factor2, spec)
    return ProductSpace(spec, m1, m2, roles, node_i, node_j, edges, d1, d2)


def dm_distance(Y: ProductSpace, p, q) -> float:
    return Y.dm(Y.resolve(p), Y.resolve(q))


def de_distance(Y: ProductSpace, p, q) -> float:
    return Y.de(Y.resolve(p), Y.resolve(q))


def inner_distance(Y: ProductSpace, p, q) -> float:
    return Y.inner_distance(p, q)


# -- curves -----------------------------------------------------------------


@dataclass
class ProductCurve:
    """Sampled curve in X1 x X2; ``breaks`` mark jumps excluded from the length."""

    points: list
    params: np.ndarray
    length: float
    breaks: tuple = ()


def _curve_length(Y: ProductSpace, pts, breaks=()) -> float:
    if len(pts) < 2:
        return 0.0
    d1 = Y.m1.consecutive([p[0] for p in pts])
    d2 = Y.m2.consecutive([p[1] for p in pts])
    seg = np.maximum(d1, d2)
    for b in breaks:
        seg[b] = 0.0
    return float(seg.sum())


@dataclass
class GammaCurves:
    p: int
    q: int
    a1: float
    a2: float
    b1: float
    b2: float
    a: float
    b: float
    d_m: float
    swapped: bool  # factors swapped so that d1 >= d2
    rays_p: tuple
    rays_q: tuple
    gap1: float
    gap2: float
    gamma: ProductCurve | None = None
    tau: float | None = None
    bridges: tuple | None = None
    gamma_c: ProductCurve | None = None
    bridge_lengths: tuple = ()
    level_defect: float = 0.0
    d: float | None = None
    a_star: float | None = None
    b_star: float | None = None
    gamma_star: ProductCurve | None = None

    @property
    def gap(self) -> float:
        return max(self.gap1, self.gap2)

    def gamma_point(self, t: float):
        return (_ray_at(self.rays_p[0], t, "gamma_1"), _ray_at(self.rays_p[1], t, "gamma_2"))

    def gamma_prime_point(self, t: float):
        return (_ray_at(self.rays_q[0], t, "gamma'_1"), _ray_at(self.rays_q[1], t, "gamma'_2"))

    def star_at(self, t: float):
        if self.a_star is None:
            raise DomainError("gamma_star not computed")
        if t <= self.a_star:
            return self.gamma_point(t)
        return self.gamma_prime_point(self.d - t)


def _ts(L: float, step: float, exact: bool, ray: GeodesicPath | None = None):
    if L <= 0:
        return np.array([0.0])
    if not exact and ray is not None:
        c = ray.cumulative
        return np.unique(np.concatenate([[0.0], c[c < L], [L]]))
    n = max(1, int(math.ceil(L / step - 1e-12)))
    return np.linspace(0.0, L, n + 1)


def _exact(Y):
    return Y.m1.space.is_exact and Y.m2.space.is_exact


def gamma_curve(Y: ProductSpace, p, q, extra: float = 0.0) -> GammaCurves:
    """Split curve from p and q along descending rays, with its jump measured.

    ``extra`` lengthens the rays beyond a and b (used by the refined curves).
    """
    u, v = Y.resolve(p), Y.resolve(q)
    P, Q = Y.point(u), Y.point(v)
    r1, r2 = Y.roles
    d1 = Y.m1.space.distance(P[0], Q[0])
    d2 = Y.m2.space.distance(P[1], Q[1])
    lp1, lp2 = r1.level(P[0]), r2.level(P[1])
    lq1, lq2 = r1.level(Q[0]), r2.level(Q[1])
    a1, b1 = 0.5 * (d1 + lp1 - lq1), 0.5 * (d1 + lq1 - lp1)
    a2, b2 = 0.5 * (d2 + lp2 - lq2), 0.5 * (d2 + lq2 - lp2)
    a, b = max(a1, a2, 0.0), max(b1, b2, 0.0)
    need_p, need_q = a + extra, b + extra
    rays_p = (r1.ray(P[0], need_p), r2.ray(P[1], need_p))
    rays_q = (r1.ray(Q[0], need_q), r2.ray(Q[1], need_q))
    gc = GammaCurves(u, v, a1, a2, b1, b2, a, b, max(d1, d2), d2 > d1, rays_p, rays_q, 0.0, 0.0)
    ga, gb = gc.gamma_point(a), gc.gamma_prime_point(b)
    gc.gap1 = Y.m1.space.distance(ga[0], gb[0])
    gc.gap2 = Y.m2.space.distance(ga[1], gb[1])
    exact = _exact(Y)
    step = Y.h / 4
    ta = _ts(a, step, exact, rays_p[0] if not exact else None)
    tb = _ts(b, step, exact, rays_q[0] if not exact else None)
    pts = [gc.gamma_point(t) for t in ta] + [gc.gamma_prime_point(t) for t in tb[::-1]]
    params = np.concatenate([ta, a + (b - tb[::-1])])
    brk = (len(ta) - 1,)
    gc.gamma = ProductCurve(pts, params, _curve_length(Y, pts, brk), brk)
    return gc


def _bridge(Y, gc, which: int, start, end, step, exact):
    """Walk a factor geodesic and pair each sample with the matching level on the
    partner ray (factor 2 ray from p for which=1, factor 1 ray from p' for which=2)."""
    r1, r2 = Y.roles
    if which == 1:
        sp, lvl, other_ray, other_lvl0 = Y.m1.space, r1.level, gc.rays_p[1], r2.level(Y.point(gc.p)[1])
    else:
        sp, lvl, other_ray, other_lvl0 = Y.m2.space, r2.level, gc.rays_q[0], r1.level(Y.point(gc.q)[0])
    eta = sp.geodesic(start, end)
    if exact:
        _, samples = eta.sample(step)
    else:
        samples = list(eta.points)
    other_space = Y.m2.space if which == 1 else Y.m1.space
    other_role = r2 if which == 1 else r1
    pts, defect = [], 0.0
    for x in samples:
        s = other_lvl0 - lvl(x)
        if s < -1e-9:
            raise DiscretizationError(f"bridge sample {x!r} needs negative ray parameter {s:.3g}", x)
        y = _ray_at(other_ray, s, f"bridge {which}")
        gap = abs(other_role.level(y) - lvl(x))
        if gap > Y.spec.eps + 1e-9:
            raise DiscretizationError(f"bridge {which} leaves Y at sample {x!r} (level gap {gap:.3g})", x)
        defect = max(defect, gap)
        pts.append((x, y) if which == 1 else (y, x))
    return pts, defect


def gamma_c_curve(Y: ProductSpace, p, q) -> GammaCurves:
    """Continuous modification of the split curve, bridged 2 delta past the jump.

    In basepoint mode with a + 2 delta >= d(p, z) the curve is spliced through
    the basepoint instead.
    """
    dl = Y.delta
    # bridges bulge past the 2 delta level by at most half their length
    gc = gamma_curve(Y, p, q, extra=10 * dl + Y.h)
    exact = _exact(Y)
    step = Y.h / 4
    a2d, b2d = gc.a + 2 * dl, gc.b + 2 * dl
    if Y.spec.mode == "basepoint":
        rp = max(gc.rays_p[0].length, gc.rays_p[1].length)
        rq = max(gc.rays_q[0].length, gc.rays_q[1].length)
        if a2d >= rp - 1e-9 or b2d >= rq - 1e-9:
            def leg(rays, L):
                ts = _ts(L, step, exact, rays[0] if not exact else None)
                if not exact:
                    ts = np.unique(np.concatenate([ts, rays[1].cumulative]))
                return ts, [(rays[0].at(min(t, rays[0].length)), rays[1].at(min(t, rays[1].length)))
                            for t in ts]
            tp, pp = leg(gc.rays_p, rp)
            tq, pq = leg(gc.rays_q, rq)
            pts = pp + pq[::-1]
            params = np.concatenate([tp, rp + (rq - tq[::-1])])
            gc.tau = rp
            gc.bridges = ()
            gc.bridge_lengths = (0.0, 0.0)
            gc.gamma_c = ProductCurve(pts, params, _curve_length(Y, pts))
            return gc
    ta = _ts(a2d, step, exact, gc.rays_p[0] if not exact else None)
    tb = _ts(b2d, step, exact, gc.rays_q[0] if not exact else None)
    leg_p = [gc.gamma_point(t) for t in ta]
    leg_q = [gc.gamma_prime_point(t) for t in tb]
    g1, g2 = gc.gamma_point(a2d), gc.gamma_prime_point(b2d)
    br1, dfa = _bridge(Y, gc, 1, g1[0], g2[0], step, exact)
    br2, dfb = _bridge(Y, gc, 2, g1[1], g2[1], step, exact)
    B1 = ProductCurve(br1, np.arange(len(br1), dtype=float), _curve_length(Y, br1))
    B2 = ProductCurve(br2, np.arange(len(br2), dtype=float), _curve_length(Y, br2))
    pts = leg_p + br1 + br2 + leg_q[::-1]
    gc.bridges = (B1, B2)
    gc.bridge_lengths = (B1.length, B2.length)
    gc.level_defect = max(dfa, dfb)
    L = _curve_length(Y, pts)
    gc.gamma_c = ProductCurve(pts, np.arange(len(pts), dtype=float), L)
    return gc


def gamma_star(Y: ProductSpace, p, q) -> GammaCurves:
    """Split curve reparameterized on [0, d(p, q)] with the jump at a*."""
    u, v = Y.resolve(p), Y.resolve(q)
    d = Y.inner_distance(u, v)
    base = gamma_curve(Y, u, v)
    half = 0.5 * max(d - base.d_m, 0.0)
    gc = gamma_curve(Y, u, v, extra=half + 1e-9)
    gc.d, gc.a_star, gc.b_star = d, gc.a + half, gc.b + half
    ts = _ts(d, Y.h, True)
    ts = np.unique(np.concatenate([ts, [gc.a_star]]))
    pts = [gc.star_at(float(t)) for t in ts]
    k = int(np.searchsorted(ts, gc.a_star))
    brk = (k,) if k < len(ts) - 1 else ()
    gc.gamma_star = ProductCurve(pts, ts, _curve_length(Y, pts, brk), brk)
    return gc


# -- verification -----------------------------------------------------------


@dataclass
class FellowTravel:
    sup: float
    t_at_sup: float
    t0: float
    witness_big: float  # distance in the larger factor at t0
    witness_small: float
    series: list  # (t, gap)

    def to_dict(self) -> dict:
        return {"sup": self.sup, "t_at_sup": self.t_at_sup, "t0": self.t0,
                "witness_big": self.witness_big, "witness_small": self.witness_small}


def fellow_travel_check(Y: ProductSpace, p, q, n_samples: int = 16, gc: GammaCurves | None = None) -> FellowTravel:
    """sup_t d(sigma(t), Gamma*(t)) for a graph shortest path sigma from p to q."""
    u, v = Y.resolve(p), Y.resolve(q)
    gc = gc if gc is not None and gc.a_star is not None else gamma_star(Y, u, v)
    chain, params = Y.shortest_path(u, v)
    d = gc.d
    ts = np.unique(np.concatenate([np.linspace(0.0, d, n_samples), [min(gc.a_star, d)]]))
    series, best, tbest = [], 0.0, 0.0
    for t in ts:
        k = int(np.argmin(np.abs(params - t)))
        sn = chain[k]
        tgt = Y.locate(gc.star_at(float(t)))
        guess = Y.dm(sn, tgt)
        g = Y.local_distance(sn, tgt, guess)
        series.append((float(t), g))
        if g > best:
            best, tbest = g, float(t)
    # intermediate witnesses in the factor with the larger displacement
    P, Q = Y.point(u), Y.point(v)
    big = 1 if gc.swapped else 0
    spaces = (Y.m1.space, Y.m2.space)
    ub = spaces[big].geodesic(P[big], Q[big])
    target = ub.at(min(gc.a, ub.length))
    cands = [Y.point(n)[big] for n in chain]
    dist_b = spaces[big].distance_matrix([target], cands)[0]
    k0 = int(np.argmin(dist_b))
    g_a = gc.gamma_point(gc.a)
    w_big = spaces[big].distance(cands[k0], g_a[big])
    w_small = spaces[1 - big].distance(Y.point(chain[k0])[1 - big], g_a[1 - big])
    return FellowTravel(best, tbest, float(params[k0]), w_big, w_small, series)


@dataclass(frozen=True)
class ProductDeltaEstimate(DeltaEstimate):
    t_deviation: float = 0.0
    jump_max: float = 0.0
    n_triples: int = 0

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update(t_deviation=self.t_deviation, jump_max=self.jump_max, n_triples=self.n_triples)
        return out


def product_delta(Y: ProductSpace, n: int = 40, seed: int = 0, n_triples: int = 12) -> ProductDeltaEstimate:
    """Four-point delta of (Y, inner metric) on sampled nodes, plus the T-deviation
    of t -> d_m(q, Gamma*(t)) for sampled triples and the size of its jump at a*."""
    nodes = Y.sample_nodes(n, seed)
    if len(nodes) < 4:
        raise DomainError("need at least 4 nodes")
    exhaustive = len(nodes) == Y.n_nodes
    G = Y.graph()
    rows = []
    for c in range(0, len(nodes), 8):
        part = dijkstra(G, directed=True, indices=nodes[c:c + 8])
        rows.append(part[:, nodes])
    D = np.vstack(rows)
    if not np.all(np.isfinite(D)):
        raise NoPathError("sampled nodes lie in different components of Y")
    D = np.maximum(D, D.T)
    delta = four_point_from_matrix(D)
    rng = np.random.default_rng(seed)
    dev_max, jump_max = 0.0, 0.0
    m = len(nodes)
    done = 0
    for _ in range(n_triples):
        i, j, k = rng.choice(m, 3, replace=False)
        u, v, w = int(nodes[i]), int(nodes[j]), int(nodes[k])
        gc = gamma_curve(Y, u, v, extra=0.5 * max(D[i, j] - Y.dm(u, v), 0.0) + 1e-9)
        half = 0.5 * max(D[i, j] - gc.d_m, 0.0)
        gc.d, gc.a_star, gc.b_star = float(D[i, j]), gc.a + half, gc.b + half
        ts = _ts(gc.d, Y.h / 2, True)
        qpt = Y.point(w)
        vals = np.array([Y.point_dm(qpt, gc.star_at(float(t))) for t in ts])
        model = fit_t_function(0.0, gc.d, vals[0], vals[-1])
        dev_max = max(dev_max, float(np.max(np.abs(vals - model(ts)))))
        ja, jb = gc.gamma_point(gc.a_star), gc.gamma_prime_point(gc.b_star)
        jump_max = max(jump_max, Y.point_dm(ja, jb))
        done += 1
    return ProductDeltaEstimate(delta, "FourPoint", m, None if exhaustive else seed, exhaustive,
                                None, dev_max, jump_max, done)


def metric_comparison(Y: ProductSpace, n_pairs: int = 20, seed: int = 0, n_balls: int = 3,
                      pairs=None) -> dict:
    """Two-sided d / d_m bound, flavor comparison, and the small-ball property."""
    pairs = pairs if pairs is not None else Y.sample_pairs(n_pairs, seed)
    slack = Y.slack
    other = "euclidean" if Y.flavor == "max" else "max"
    rows = []
    for u, v in pairs:
        d = Y.inner_distance(u, v)
        dother = Y.inner_distance(u, v, other)
        dmax, deuc = (d, dother) if Y.flavor == "max" else (dother, d)
        rows.append({"u": int(u), "v": int(v), "d": d, "d_m": Y.dm(u, v), "d_max": dmax, "d_euc": deuc})
    lower_ok = all(r["d_m"] <= r["d_max"] + 1e-9 for r in rows)
    excess = max((r["d_max"] - r["d_m"] for r in rows), default=0.0)
    upper_ok = excess <= 20 * Y.delta + slack
    flavor_ok = all(r["d_max"] - 1e-9 <= r["d_euc"] <= math.sqrt(2) * r["d_max"] + 1e-9 for r in rows)
    rho0 = 8 * Y.h
    balls = []
    for y0 in Y.sample_nodes(n_balls, seed + 1):
        y0 = int(y0)
        dm_all = Y.dm_to_all(y0)
        d = dijkstra(Y.graph(), directed=True, indices=y0, limit=4 * rho0 + 4 * Y.h)
        sups = []
        for rho in (rho0, rho0 / 2, rho0 / 4):
            mask = dm_all < rho
            sups.append(float(np.max(d[mask])))
        balls.append({"node": y0, "radii": [rho0, rho0 / 2, rho0 / 4], "sup_d": sups})
    ball_ok = all(b["sup_d"][0] >= b["sup_d"][1] >= b["sup_d"][2]
                  and all(s <= 2 * r + Y.slack for s, r in zip(b["sup_d"], b["radii"]))
                  for b in balls)
    return {"pairs": rows, "lower_ok": lower_ok, "upper_ok": upper_ok, "max_excess": excess,
            "bound": 20 * Y.delta + slack, "flavor_ok": flavor_ok, "balls": balls, "ball_ok": ball_ok}


def verify_pair(Y: ProductSpace, u: int, v: int, n_samples: int = 16) -> dict:
    """All per-pair bounds on one pair, reusing one Dijkstra."""
    dl, slack = Y.delta, Y.slack
    gs = gamma_star(Y, u, v)
    gcc = gamma_c_curve(Y, u, v)
    ft = fellow_travel_check(Y, u, v, n_samples=n_samples, gc=gs)
    rec = {
        "u": int(u), "v": int(v), "p": Y.point(u), "q": Y.point(v),
        "d": gs.d, "d_m": gs.d_m, "a": gs.a, "b": gs.b, "a_star": gs.a_star, "b_star": gs.b_star,
        "gap": gs.gap, "length_c": gcc.gamma_c.length, "tau": gcc.tau,
        "bridge_lengths": list(gcc.bridge_lengths), "fellow": ft.sup,
        "witness_big": ft.witness_big, "witness_small": ft.witness_small,
    }
    rec["ok_lower"] = gs.d_m <= gs.d + 1e-9
    rec["ok_upper"] = gs.d <= gs.d_m + 20 * dl + slack
    rec["ok_length_c"] = gcc.gamma_c.length <= gs.d_m + 20 * dl + slack
    rec["ok_gap"] = gs.gap <= 8 * dl + slack
    rec["ok_fellow"] = ft.sup <= 500 * dl + slack
    rec["ok_bridges"] = all(L <= 8 * dl + slack for L in gcc.bridge_lengths)
    rec["_series"] = ft.series
    return rec
