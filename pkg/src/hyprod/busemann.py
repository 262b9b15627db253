"""Busemann functions, B-rays, the Busemann-Gromov product and ideal triangles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HorizonTooShortError, TruncatedRayError
from .spaces import GeodesicPath, GraphSpace, Segment, Space, UpperHalfPlane

CLOSED_FORMS = ("segment_plus", "segment_minus", "uhp_vertical")


@dataclass(frozen=True)
class BusemannField:
    """Busemann function of a ray, either in closed form or by finite horizon.

    Closed forms (B vanishes at ``origin``):

    * ``segment_plus``   ray toward +inf, B(x) = origin - x
    * ``segment_minus``  ray toward -inf, B(x) = x - origin
    * ``uhp_vertical``   upward vertical ray from (x0, y0), B(x, y) = -ln(y / y0)

    Otherwise ``ray`` is a geodesic path and B(x) = d(x, ray(T)) - T, checked
    against the same expression at T/2.
    """

    space: Space
    closed_form: str | None = None
    origin: object = None
    ray: GeodesicPath | None = None
    horizon: float | None = None
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.closed_form is None and self.ray is None:
            raise DomainError("a Busemann field needs a closed form or a base ray")
        if self.closed_form is not None:
            if self.closed_form not in CLOSED_FORMS:
                raise DomainError(f"unknown closed form {self.closed_form!r}")
            want = UpperHalfPlane if self.closed_form == "uhp_vertical" else Segment
            if not isinstance(self.space, want):
                raise DomainError(f"{self.closed_form} needs a {want.kind} space")
            if self.origin is None:
                object.__setattr__(self, "origin", (0.0, 1.0) if want is UpperHalfPlane else 0.0)
        if self.ray is not None and self.horizon is None:
            object.__setattr__(self, "horizon", 0.8 * self.ray.length)

    @property
    def label(self) -> str:
        return self.space.label

    def _anchor(self, t):
        ray = self.ray
        if ray.evaluator is None:
            k = ray.index_at(t)
            return ray.points[k], float(ray.cumulative[k])
        return ray.at(t), float(t)

    def value_with_defect(self, x):
        """(B(x), Cauchy defect). The defect is 0 for closed forms."""
        sp = self.space
        sp.check(x)
        cf = self.closed_form
        if cf == "segment_plus":
            return self.origin - float(x), 0.0
        if cf == "segment_minus":
            return float(x) - self.origin, 0.0
        if cf == "uhp_vertical":
            return -math.log(x[1] / self.origin[1]), 0.0
        qT, tT = self._anchor(self.horizon)
        qH, tH = self._anchor(0.5 * self.horizon)
        v = sp.distance(x, qT) - tT
        return v, abs(v - (sp.distance(x, qH) - tH))

    def __call__(self, x) -> float:
        return busemann_value(self, x)

    def values(self, points) -> np.ndarray:
        """Vectorized B; NaN where the horizon is too short."""
        cf = self.closed_form
        if cf == "segment_plus":
            return self.origin - np.asarray(points, float)
        if cf == "segment_minus":
            return np.asarray(points, float) - self.origin
        if cf == "uhp_vertical":
            return -np.log(np.asarray(points, float).reshape(-1, 2)[:, 1] / self.origin[1])
        qT, tT = self._anchor(self.horizon)
        qH, tH = self._anchor(0.5 * self.horizon)
        D = self.space.distance_matrix([qT, qH], list(points))
        v = D[0] - tT
        out = np.where(np.abs(v - (D[1] - tH)) <= self.tolerance, v, np.nan)
        return out


def busemann_value(field: BusemannField, x) -> float:
    v, defect = field.value_with_defect(x)
    if defect > field.tolerance:
        raise HorizonTooShortError(
            f"Cauchy defect {defect:.3g} at {x!r} exceeds tolerance {field.tolerance:g}", defect)
    return float(v)


def field_from_doc(space: Space, spec: dict) -> BusemannField:
    """Build a field from the ``busemann`` block of a space document."""
    tol = spec.get("tolerance", 1e-9)
    if "closed_form" in spec:
        origin = spec.get("origin")
        if isinstance(origin, list):
            origin = tuple(map(float, origin))
        return BusemannField(space, spec["closed_form"], origin, tolerance=tol)
    if not isinstance(space, GraphSpace):
        raise DomainError("ray-based fields are supported on graph models only")
    if "ray" in spec:
        verts = [int(v) for v in spec["ray"]]
        cum = [0.0]
        for u, v in zip(verts, verts[1:]):
            w = dict(space.neighbors(u)).get(v)
            if w is None:
                raise DomainError(f"ray step {u}->{v} is not an edge")
            cum.append(cum[-1] + w)
        ray = GeodesicPath(verts, np.array(cum))
        if abs(space.distance(verts[0], verts[-1]) - ray.length) > 1e-9:
            raise DomainError("base ray is not a geodesic")
    elif "ray_from" in spec and "ray_to" in spec:
        ray = space.geodesic(spec["ray_from"], spec["ray_to"])
    else:
        raise DomainError("busemann block needs closed_form, ray, or ray_from/ray_to")
    return BusemannField(space, ray=ray, horizon=spec.get("horizon"), tolerance=tol)


def _validate_ray(field: BusemannField, path: GeodesicPath, slack: float) -> float:
    b0 = busemann_value(field, path.points[0])
    if path.evaluator is not None:
        ts, pts = path.sample(max(path.length / 32, 1e-6))
    else:
        ts, pts = path.cumulative, path.points
    err = max(abs(busemann_value(field, q) - b0 + t) for t, q in zip(ts, pts))
    if err > field.tolerance + slack:
        raise DomainError(f"B-ray rejected: B decreases off unit rate by {err:.3g}")
    return err


def b_ray_from(field: BusemannField, x, length: float, allow_short: bool = False) -> GeodesicPath:
    """Unit-speed path from x along which B drops at unit rate.

    With ``allow_short`` a truncated ray is returned instead of raising.
    """
    if not length > 0:
        raise DomainError("ray length must be positive")
    sp, cf = field.space, field.closed_form
    if cf in ("segment_plus", "segment_minus"):
        x = float(sp.check(x))
        sgn = 1.0 if cf == "segment_plus" else -1.0
        room = (sp.hi - x) if sgn > 0 else (x - sp.lo)
        if room < length - 1e-12:
            if not allow_short:
                raise TruncatedRayError(f"segment ends after {room:g}", room)
            length = max(room, 0.0)
        return GeodesicPath([x, x + sgn * length], np.array([0.0, length]), lambda t: x + sgn * t)
    if cf == "uhp_vertical":
        x0, y0 = sp.check(x)
        path = sp.geodesic((x0, y0), (x0, y0 * math.exp(length)))
        path.evaluator = lambda t: (x0, y0 * math.exp(t))
        return path
    if not isinstance(sp, GraphSpace):
        raise DomainError("B-rays need a closed form or a graph model")
    # greedy steepest descent, smallest vertex id on ties
    tol = field.tolerance
    u = int(sp.check(x))
    bu = busemann_value(field, u)
    verts, cum = [u], [0.0]
    while cum[-1] < length - tol:
        nxt = None
        for v, w in sp.neighbors(u):
            v_b, defect = field.value_with_defect(v)
            if defect <= tol and abs(v_b - (bu - w)) <= tol:
                nxt = (v, w, v_b)
                break
        if nxt is None:
            if allow_short:
                break
            raise TruncatedRayError(f"B-descent stalls at vertex {u} after {cum[-1]:g}", cum[-1])
        u, w, bu = nxt
        verts.append(u)
        cum.append(cum[-1] + w)
    path = GeodesicPath(verts, np.array(cum))
    _validate_ray(field, path, 0.0)
    return path


def busemann_gromov_product(field: BusemannField, x, y):
    """(a, b) with a = (d(x,y) + B(x) - B(y)) / 2 and b = d(x,y) - a."""
    d = field.space.distance(x, y)
    bx, by = busemann_value(field, x), busemann_value(field, y)
    return 0.5 * (d + bx - by), 0.5 * (d + by - bx)


@dataclass(frozen=True)
class IdealTriangleData:
    a: float
    b: float
    tilde_u: object  # on the xy geodesic at a
    tilde_y: object  # on the B-ray from x at a
    tilde_x: object  # on the B-ray from y at b
    d_uy: float
    d_ux: float
    d_xy: float
    fellow_sup: float  # sup_t d(gamma_x(a+t), gamma_y(b+t))
    fellow_range: float

    @property
    def spread(self) -> float:
        return max(self.d_uy, self.d_ux, self.d_xy)


def ideal_triangle_points(field: BusemannField, x, y, extra: float | None = None,
                          n_t: int = 33) -> IdealTriangleData:
    """Comparison points of the ideal triangle with vertices x, y and the ray's end.

    ``extra`` is how far past a (resp. b) the fellow-travel check runs. It
    defaults to as far as both rays exist on graphs and to 2 on exact models.
    """
    sp = field.space
    a, b = busemann_gromov_product(field, x, y)
    a, b = max(a, 0.0), max(b, 0.0)
    tu = sp.geodesic(x, y).at(min(a, sp.distance(x, y)))
    graph = isinstance(sp, GraphSpace)
    want = extra if extra is not None else (math.inf if graph else 2.0)
    if graph:
        # graphs: longest available rays, capped by the horizon
        cap = field.ray.length + sp.all_pairs.max() if field.ray is not None else 1e6
        gx = b_ray_from(field, x, min(a + want, cap), allow_short=True) if a + want > 0 else None
        gy = b_ray_from(field, y, min(b + want, cap), allow_short=True) if b + want > 0 else None
        if (gx is None or gx.length < a - 1e-9) and a > 0:
            raise TruncatedRayError("B-ray from x shorter than a", gx.length if gx else 0.0)
        if (gy is None or gy.length < b - 1e-9) and b > 0:
            raise TruncatedRayError("B-ray from y shorter than b", gy.length if gy else 0.0)
    else:
        gx = b_ray_from(field, x, a + want) if a + want > 0 else None
        gy = b_ray_from(field, y, b + want) if b + want > 0 else None
    at_x = (lambda t: gx.at(t)) if gx is not None else (lambda t: x)
    at_y = (lambda t: gy.at(t)) if gy is not None else (lambda t: y)
    ty, tx = at_x(a), at_y(b)
    lx = gx.length if gx is not None else 0.0
    ly = gy.length if gy is not None else 0.0
    span = max(0.0, min(lx - a, ly - b))
    if graph:
        ts = np.unique(np.concatenate([gx.cumulative - a if gx is not None else [0.0],
                                       gy.cumulative - b if gy is not None else [0.0]]))
        ts = ts[(ts >= 0) & (ts <= span + 1e-12)]
    else:
        ts = np.linspace(0.0, span, n_t)
    fellow = max((sp.distance(at_x(a + t), at_y(b + t)) for t in ts), default=0.0)
    return IdealTriangleData(a, b, tu, ty, tx, sp.distance(tu, ty), sp.distance(tu, tx),
                             sp.distance(tx, ty), float(fellow), float(span))


@dataclass(frozen=True)
class SigmaComparison:
    sup: float
    R: float
    t_at_sup: float

    def bound(self, delta: float) -> float:
        return 1.5 * self.R + 4 * delta

    def holds(self, delta: float, slack: float) -> bool:
        return self.sup <= self.bound(delta) + slack


def sigma_comparison(space: Space, x, y, sigma, R: float | None = None,
                     params=None, n_t: int = 201) -> SigmaComparison:
    """sup_t d(gamma_xy(t), sigma(t)) on [0, d(x,y)] for a unit-speed polyline sigma.

    ``sigma`` is a list of points (parameterized by cumulative leg length) or
    a GeodesicPath whose parameterization is checked. Past its end sigma is
    held at its final point.
    """
    if isinstance(sigma, GeodesicPath):
        pts, cum = list(sigma.points), np.asarray(sigma.cumulative, float)
        tol = space.slack if space.is_exact else max(space.mesh, 1e-9)
        for k in range(len(pts) - 1):
            if abs(space.distance(pts[k], pts[k + 1]) - (cum[k + 1] - cum[k])) > tol:
                raise DomainError("sigma is not arclength-parameterized")
    else:
        pts = list(sigma)
        if not pts:
            raise DomainError("empty sigma")
        legs = [space.distance(p, q) for p, q in zip(pts, pts[1:])]
        cum = np.concatenate([[0.0], np.cumsum(legs)])
    if space.distance(pts[0], x) > max(space.slack, space.mesh):
        raise DomainError("sigma does not start at x")
    D = space.distance(x, y)
    end = space.distance(pts[-1] if cum[-1] <= D else _sigma_at(space, pts, cum, D), y)
    R = end if R is None else R
    if end > R + space.slack:
        raise DomainError(f"d(sigma(end), y) = {end:g} exceeds R = {R:g}")
    geo = space.geodesic(x, y)
    if space.is_exact:
        ts = np.linspace(0.0, D, n_t)
    else:
        ts = np.unique(np.concatenate([geo.cumulative, cum[cum <= D]]))
    best, tbest = 0.0, 0.0
    for t in ts:
        v = space.distance(geo.at(min(t, D)), _sigma_at(space, pts, cum, t))
        if v > best:
            best, tbest = v, float(t)
    return SigmaComparison(float(best), float(R), tbest)


def _sigma_at(space, pts, cum, t):
    if t >= cum[-1]:
        return pts[-1]
    k = int(np.searchsorted(cum, t, side="right")) - 1
    if not space.is_exact:
        return pts[k] if t - cum[k] <= cum[k + 1] - t else pts[k + 1]
    seg = space.geodesic(pts[k], pts[k + 1])
    return seg.at(min(t - cum[k], seg.length))
