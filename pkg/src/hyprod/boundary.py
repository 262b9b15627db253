"""Sequences at infinity, their equivalence, and ray classification in Y."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, TruncatedRayError
from .product import ProductSpace, gamma_star, _ray_at


@dataclass
class BoundarySample:
    """A sequence x_0, x_1, ... seen from basepoint z.

    ``metric(A, B)`` returns the distance matrix between point lists. ``gromov``
    holds (x_k . x_l)_z for all k, l.
    """

    z: object
    points: list
    metric: Callable
    gromov: np.ndarray = field(init=False)
    dz: np.ndarray = field(init=False)

    def __post_init__(self):
        self.dz = np.asarray(self.metric([self.z], self.points)[0], float)
        D = np.asarray(self.metric(self.points, self.points), float)
        self.gromov = 0.5 * (self.dz[:, None] + self.dz[None, :] - D)
        self.gromov = 0.5 * (self.gromov + self.gromov.T)

    def __len__(self):
        return len(self.points)

    def tail_min(self, start: int | None = None) -> float:
        """min over start <= k < l of (x_k . x_l)_z."""
        n = len(self)
        m = n // 2 if start is None else start
        sub = self.gromov[m:, m:]
        if sub.shape[0] < 2:
            raise DomainError("tail has fewer than two elements")
        iu = np.triu_indices(sub.shape[0], 1)
        return float(sub[iu].min())

    def proxy_profile(self) -> np.ndarray:
        return np.array([self.tail_min(m) for m in range(len(self) - 1)])

    def cross(self, other: "BoundarySample") -> np.ndarray:
        D = np.asarray(self.metric(self.points, other.points), float)
        return 0.5 * (self.dz[:, None] + other.dz[None, :] - D)


def converges_to_infinity(sample: BoundarySample, threshold: float):
    """(verdict, proxy): tail-min Gromov product against a threshold."""
    if len(sample) < 4:
        raise DomainError("need at least 4 sequence elements")
    proxy = sample.tail_min()
    return proxy >= threshold, proxy


def cross_tail_min(s1: BoundarySample, s2: BoundarySample) -> float:
    G = s1.cross(s2)
    return float(G[len(s1) // 2:, len(s2) // 2:].min())


def sequences_equivalent(s1: BoundarySample, s2: BoundarySample, threshold: float) -> bool:
    for s in (s1, s2):
        ok, proxy = converges_to_infinity(s, threshold)
        if not ok:
            raise DomainError(f"sequence does not converge to infinity (proxy {proxy:.3g} < {threshold:.3g})")
    return cross_tail_min(s1, s2) >= threshold


def in_neighborhood(v: BoundarySample, w: BoundarySample, r: float) -> bool:
    """Membership of w in the neighbourhood U(v, r)."""
    return cross_tail_min(v, w) >= r


# -- rays in Y --------------------------------------------------------------


def product_metric(Y: ProductSpace):
    def metric(A, B):
        return np.array([[Y.inner_distance(int(a), int(b)) for b in B] for a in A])
    return metric


def product_sample(Y: ProductSpace, nodes) -> BoundarySample:
    nodes = [int(n) for n in nodes]
    return BoundarySample(nodes[0], nodes, product_metric(Y))


def factor_sample(Y: ProductSpace, nodes, i: int) -> BoundarySample:
    sp = (Y.m1.space, Y.m2.space)[i]
    pts = [Y.point(int(n))[i] for n in nodes]
    return BoundarySample(pts[0], pts, sp.distance_matrix)


def ray_toward(Y: ProductSpace, z, target, K: int) -> list:
    """Shortest path in Y from z toward target, sampled at integer arclength 0..K."""
    chain, params = Y.shortest_path(z, target)
    if params[-1] < K - 0.5 * Y.h:
        raise TruncatedRayError(f"ray reaches only {params[-1]:.3g} < K={K}", float(params[-1]))
    return [int(chain[int(np.argmin(np.abs(params - k)))]) for k in range(K + 1)]


def ray_from_points(Y: ProductSpace, pts) -> list:
    return [Y.locate(tuple(p)) for p in pts]


@dataclass
class RayClassification:
    case: str  # Case1_ToU | Case2_Factorized
    a_star: list
    b_star: list
    K: int
    nodes: list
    witness_gaps: list = field(default_factory=list)

    @property
    def max_gap(self) -> float:
        return max(self.witness_gaps, default=0.0)

    def to_dict(self) -> dict:
        return {"case": self.case, "K": self.K, "a_star": self.a_star, "b_star": self.b_star,
                "max_witness_gap": self.max_gap}


def classify_ray(Y: ProductSpace, sigma, lam: float = 0.5) -> RayClassification:
    """Case 1 if a_k* exceeds lam*K somewhere, else Case 2 with factor witnesses."""
    nodes = [Y.resolve(s) for s in sigma]
    K = len(nodes) - 1
    if K < 1:
        raise DomainError("ray needs at least two samples")
    z = nodes[0]
    a_s, b_s, gaps = [], [], []
    for k in range(1, K + 1):
        gc = gamma_star(Y, z, nodes[k])
        a_s.append(gc.a_star)
        b_s.append(gc.b_star)
        # factor legs meet at matching parameters
        try:
            ga = gc.gamma_point(gc.a_star)
            gb = gc.gamma_prime_point(gc.b_star)
        except TruncatedRayError as e:
            raise TruncatedRayError(f"witness ray truncated at k={k}", e.achieved) from e
        gaps.append(max(Y.m1.space.distance(ga[0], gb[0]), Y.m2.space.distance(ga[1], gb[1])))
    case = "Case1_ToU" if max(a_s) > lam * K else "Case2_Factorized"
    return RayClassification(case, a_s, b_s, K, nodes, gaps if case == "Case2_Factorized" else [])


def _partition(items, same):
    """Group indices by a pairwise predicate (first-fit, deterministic)."""
    reps, labels = [], []
    for i, it in enumerate(items):
        for c, r in enumerate(reps):
            if same(items[r], it):
                labels.append(c)
                break
        else:
            reps.append(i)
            labels.append(len(reps) - 1)
    return labels


def factorization_check(Y: ProductSpace, rays, lam: float = 0.5, threshold: float | None = None,
                        halving: bool = True) -> dict:
    """Classify rays, group them into boundary classes, and compare the Case-2
    classes with pairs of factor classes."""
    rays = [[Y.resolve(s) for s in r] for r in rays]
    K = min(len(r) for r in rays) - 1
    rays = [r[:K + 1] for r in rays]
    thr = 0.25 * K if threshold is None else threshold
    cls = [classify_ray(Y, r, lam) for r in rays]
    samples = [product_sample(Y, r) for r in rays]
    conv = [converges_to_infinity(s, thr) for s in samples]
    y_labels = _partition(list(range(len(rays))),
                          lambda i, j: cross_tail_min(samples[i], samples[j]) >= thr)
    case1 = [i for i, c in enumerate(cls) if c.case == "Case1_ToU"]
    case2 = [i for i, c in enumerate(cls) if c.case == "Case2_Factorized"]
    fac = [[factor_sample(Y, r, f) for r in rays] for f in (0, 1)]
    f_labels = [_partition(list(range(len(rays))),
                           lambda i, j, f=f: cross_tail_min(fac[f][i], fac[f][j]) >= thr) for f in (0, 1)]
    pair_of = {i: (f_labels[0][i], f_labels[1][i]) for i in case2}
    respects = all((y_labels[i] == y_labels[j]) == (pair_of[i] == pair_of[j]) for i in case2 for j in case2)
    case1_collapse = len({y_labels[i] for i in case1}) <= 1
    # transitivity on the tested family
    eq = [[cross_tail_min(samples[i], samples[j]) >= thr for j in range(len(rays))] for i in range(len(rays))]
    n = len(rays)
    transitive = all(not (eq[i][j] and eq[j][k]) or eq[i][k] for i in range(n) for j in range(n) for k in range(n))
    symmetric = all(eq[i][j] == eq[j][i] for i in range(n) for j in range(n))
    reflexive = all(eq[i][i] for i in range(n))
    classes = len(set(y_labels))
    out = {
        "K": K, "threshold": thr, "n_rays": n, "classes": classes,
        "case1": len(case1), "case2": len(case2),
        "case2_classes": len({y_labels[i] for i in case2}),
        "factor_pairs": sorted({pair_of[i] for i in case2}),
        "injective": respects, "case1_collapse": case1_collapse,
        "all_converge": all(c[0] for c in conv),
        "reflexive": reflexive, "symmetric": symmetric, "transitive": transitive,
        "witness_gap_max": max((c.max_gap for c in cls), default=0.0),
        "labels": y_labels, "cases": [c.case for c in cls],
    }
    if halving and K >= 8:
        half = factorization_check(Y, [r[:K // 2 + 1] for r in rays], lam, None if threshold is None
                                   else threshold / 2, halving=False)
        out["halving_stable"] = half["labels"] == y_labels and half["cases"] == out["cases"]
    return out
