"""Gromov products, tripods, delta estimates, T-functions and the Morse detour check."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError, InfeasibleError
from .spaces import EXHAUSTIVE_MAX, GeodesicPath, GraphSpace, Space


def gromov_product(space: Space, y, z, x) -> float:
    """(y.z)_x = (d(y,x) + d(z,x) - d(y,z)) / 2."""
    return 0.5 * (space.distance(y, x) + space.distance(z, x) - space.distance(y, z))


# -- tripods ----------------------------------------------------------------


@dataclass(frozen=True)
class TripodData:
    a: float
    b: float
    c: float
    tilde_x: object  # on the yz side, at distance b from y
    tilde_y: object  # on the xz side, at distance a from x
    tilde_z: object  # on the xy side, at distance a from x
    d_xy: float  # d(tilde_x, tilde_y)
    d_xz: float
    d_yz: float

    @property
    def spread(self) -> float:
        return max(self.d_xy, self.d_xz, self.d_yz)


def _clamped_at(path: GeodesicPath, t: float):
    return path.at(min(max(t, 0.0), path.length))


def tripod_decomposition(space: Space, x, y, z) -> TripodData:
    a = gromov_product(space, y, z, x)
    b = gromov_product(space, x, z, y)
    c = gromov_product(space, x, y, z)
    tz = _clamped_at(space.geodesic(x, y), a)
    ty = _clamped_at(space.geodesic(x, z), a)
    tx = _clamped_at(space.geodesic(y, z), b)
    return TripodData(a, b, c, tx, ty, tz, space.distance(tx, ty), space.distance(tx, tz),
                      space.distance(ty, tz))


def ray_comparison_sup(space: Space, x, y, z, step: float | None = None) -> float:
    """sup over t in [0, a] of d(gamma_xy(t), gamma_xz(t)), a = (y.z)_x."""
    a = max(gromov_product(space, y, z, x), 0.0)
    g1, g2 = space.geodesic(x, y), space.geodesic(x, z)
    if space.is_exact:
        step = step or (space.mesh or a / 64 or 1.0)
        ts = np.linspace(0.0, a, max(2, int(math.ceil(a / step)) + 1))
    else:
        ts = np.unique(np.concatenate([g1.cumulative, g2.cumulative, [a]]))
        ts = ts[ts <= a + 1e-12]
    return max((space.distance(_clamped_at(g1, t), _clamped_at(g2, t)) for t in ts), default=0.0)


# -- four-point delta -------------------------------------------------------


@numba.njit(cache=True)
def _four_point_kernel(D):
    n = D.shape[0]
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dij = D[i, j]
            for k in range(j + 1, n):
                dik = D[i, k]
                djk = D[j, k]
                for l in range(k + 1, n):
                    s1 = dij + D[k, l]
                    s2 = dik + D[j, l]
                    s3 = D[i, l] + djk
                    # largest minus second largest
                    if s1 >= s2:
                        hi, mid = s1, s2
                    else:
                        hi, mid = s2, s1
                    if s3 > hi:
                        mid = hi
                        hi = s3
                    elif s3 > mid:
                        mid = s3
                    v = hi - mid
                    if v > best:
                        best = v
    return 0.5 * best


def four_point_from_matrix(D) -> float:
    """Four-point delta of a full distance matrix."""
    D = np.ascontiguousarray(D, dtype=np.float64)
    if D.shape[0] < 4:
        return 0.0
    return float(_four_point_kernel(D))


@dataclass(frozen=True)
class DeltaEstimate:
    delta: float
    method: str
    sample_size: int
    seed: int | None
    is_exhaustive: bool
    tilde_delta: float | None = None

    def to_dict(self) -> dict:
        return {"delta": self.delta, "method": self.method, "sample_size": self.sample_size,
                "seed": self.seed, "is_exhaustive": self.is_exhaustive,
                "tilde_delta": self.tilde_delta}


def _triples(m: int, limit: int, rng):
    total = m * (m - 1) * (m - 2) // 6
    if total <= limit:
        return list(itertools.combinations(range(m), 3))
    out = set()
    while len(out) < limit:
        i, j, k = sorted(rng.choice(m, 3, replace=False).tolist())
        out.add((i, j, k))
    return sorted(out)


def four_point_delta(space: Space, points="all", n: int = 200, seed: int = 0,
                     triangles: int = 2000) -> DeltaEstimate:
    """Four-point delta on a point set, with the tilde-point estimator alongside.

    ``points="all"`` enumerates every vertex of graphs with at most
    ``EXHAUSTIVE_MAX`` vertices and samples ``n`` points otherwise.
    """
    exhaustive = False
    if isinstance(points, str):
        if points != "all":
            raise DomainError(f"unknown point selector {points!r}")
        if isinstance(space, GraphSpace) and space.n <= EXHAUSTIVE_MAX:
            pts, exhaustive = list(space.vertices), True
        else:
            pts = space.sample_points(n, seed)
    elif points is None:
        pts = space.sample_points(n, seed)
    else:
        pts = list(points)
        exhaustive = isinstance(space, GraphSpace) and sorted(set(pts)) == space.vertices
    if len(pts) < 3:
        raise DomainError("need at least 3 points")
    D = space.distance_matrix(pts, pts)
    delta = four_point_from_matrix(D)
    rng = np.random.default_rng(seed)
    if exhaustive:
        tris = list(itertools.combinations(range(len(pts)), 3))
    else:
        tris = _triples(len(pts), triangles, rng)
    tilde = max(tripod_decomposition(space, pts[i], pts[j], pts[k]).spread for i, j, k in tris)
    return DeltaEstimate(delta, "FourPoint", len(pts), None if exhaustive else seed,
                         exhaustive, float(tilde))


# -- T-functions ------------------------------------------------------------


@dataclass(frozen=True)
class TFunction:
    """Descends at slope -1 from t1 to the kink value c at alpha+a, then rises to t2."""

    alpha: float
    omega: float
    a: float
    c: float
    t1: float
    t2: float

    @property
    def b(self) -> float:
        return self.omega - self.alpha - self.a

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        v = np.maximum(self.t1 - (t - self.alpha), self.t2 - (self.omega - t))
        return float(v) if v.ndim == 0 else v

    def endpoints(self):
        return (self.alpha, self.omega, self(self.alpha), self(self.omega))


def fit_t_function(alpha: float, omega: float, t1: float, t2: float) -> TFunction:
    """The unique T-function on [alpha, omega] with the given endpoint values."""
    L = abs(omega - alpha)
    if omega < alpha:
        raise DomainError("need alpha <= omega")
    if abs(t1 - t2) > L * (1 + 1e-12) + 1e-12:
        raise InfeasibleError(f"|t1 - t2| = {abs(t1 - t2)} exceeds interval length {L}")
    a = 0.5 * (L + t1 - t2)
    c = 0.5 * (t1 + t2 - L)
    a = min(max(a, 0.0), L)
    return TFunction(float(alpha), float(omega), float(a), float(c), float(t1), float(t2))


def t_deviation(samples, model: TFunction, tol: float = 1e-9) -> float:
    """sup |value - model(t)| over (t, value) samples."""
    s = np.asarray(samples, dtype=float).reshape(-1, 2)
    if len(s) == 0:
        return 0.0
    span = max(1.0, abs(model.omega - model.alpha))
    if s[:, 0].min() < model.alpha - tol * span or s[:, 0].max() > model.omega + tol * span:
        raise DomainError("sample abscissae outside the model interval")
    return float(np.max(np.abs(s[:, 1] - model(s[:, 0]))))


def t_profile(space: Space, z, path: GeodesicPath, step: float | None = None):
    """Arrays (t, d(z, path(t))) and the fitted TFunction."""
    if space.is_exact:
        step = step or (space.mesh or path.length / 64 or 1.0)
        ts, pts = path.sample(step)
    else:
        ts, pts = path.cumulative, path.points
    vals = space.distance_matrix([z], pts)[0]
    model = fit_t_function(0.0, path.length, float(vals[0]), float(vals[-1]))
    return np.asarray(ts, float), vals, model


def distance_function_t_check(space: Space, z, path: GeodesicPath, step: float | None = None) -> float:
    ts, vals, model = t_profile(space, z, path, step)
    return t_deviation(np.column_stack([ts, vals]), model)


# -- Morse detour estimate --------------------------------------------------


@dataclass(frozen=True)
class MorseParams:
    R: float
    delta: float

    def __post_init__(self):
        if self.R < 0 or self.delta < 0:
            raise DomainError("R and delta must be nonnegative")

    @property
    def admissible(self) -> bool:
        return self.delta > 0 and self.R > 90 * self.delta

    def claimed_bound(self, d: float) -> float:
        return d + self.R ** 2 / (20 * self.delta) if self.delta > 0 else math.inf


@dataclass(frozen=True)
class MorseVerdict:
    status: str  # precondition_unmet | bound_holds | bound_violated
    length: float
    distance: float
    min_distance: float
    bound: float
    margin: float
    reason: str = ""
    witness: dict = field(default_factory=dict)


def min_distance_to_polyline(space: Space, p, detour) -> float:
    if not space.is_exact:
        return float(np.min(space.distance_matrix([p], list(detour))))
    best = math.inf
    for q0, q1 in zip(detour, detour[1:]):
        best = min(best, space.distance_to_path(p, space.geodesic(q0, q1)))
    if len(detour) == 1:
        best = space.distance(p, detour[0])
    return best


def morse_check(space: Space, detour, x, y, p, params: MorseParams) -> MorseVerdict:
    detour = list(detour)
    if not detour:
        raise DomainError("empty detour")
    tol = max(space.slack, space.mesh)
    if space.distance(detour[0], x) > tol or space.distance(detour[-1], y) > tol:
        raise DomainError("detour does not connect x to y")
    d = space.distance(x, y)
    if space.distance(x, p) + space.distance(p, y) - d > tol:
        raise DomainError("p is not on the geodesic from x to y")
    L = space.path_length(detour)
    rmin = min_distance_to_polyline(space, p, detour)
    bound = params.claimed_bound(d)
    witness = {"x": x, "y": y, "p": p, "detour": detour, "R": params.R, "delta": params.delta}
    if rmin < params.R - space.slack:
        return MorseVerdict("precondition_unmet", L, d, rmin, bound, math.nan,
                            "detour enters the R-ball", witness)
    if not params.admissible:
        return MorseVerdict("precondition_unmet", L, d, rmin, bound, math.nan,
                            "R <= 90 delta", witness)
    margin = L - bound
    status = "bound_holds" if margin >= -space.slack else "bound_violated"
    return MorseVerdict(status, L, d, rmin, bound, margin, "", witness if status != "bound_holds" else {})


# -- slim triangles ---------------------------------------------------------


def slim_triangle_delta(space: Space, x, y, z, step: float | None = None) -> float:
    """Max over side samples of the distance to the union of the other two sides."""
    sides = [space.geodesic(x, y), space.geodesic(y, z), space.geodesic(z, x)]
    worst = 0.0
    for k, side in enumerate(sides):
        others = [sides[j] for j in range(3) if j != k]
        if space.is_exact:
            _, pts = side.sample(step or space.mesh or max(side.length / 64, 1e-3))
        else:
            pts = side.points
        for q in pts:
            worst = max(worst, min(space.distance_to_path(q, o) for o in others))
    return worst
