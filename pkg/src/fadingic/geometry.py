"""Two-dimensional rate-region geometry.

Polytopes here only ever carry constraint normals from the fixed set
{(1,0), (0,1), (1,1), (2,1), (1,2)} plus the two axes, so vertices are
pairwise line intersections and no LP solver is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional

import numpy as np

from .bounds import RatePolytope

__all__ = [
    "TOL",
    "DEFAULT_DIRECTIONS",
    "RatePoint",
    "RateRegion",
    "ShiftReport",
    "direction_angles",
    "direction_grid",
    "support_value",
    "vertices",
    "union_region",
    "contains_point",
    "shifted_containment",
    "batch_support",
    "batch_support_paired",
    "boundary_polyline",
]

TOL = 1e-9
DEFAULT_DIRECTIONS = 721


@dataclass(frozen=True)
class RatePoint:
    r1: float
    r2: float

    def __post_init__(self):
        for name in ("r1", "r2"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    def __iter__(self):
        return iter((self.r1, self.r2))


def direction_angles(D: int) -> np.ndarray:
    if D < 2:
        raise ValueError("need at least two directions")
    return np.linspace(0.0, np.pi / 2, D)


def _angle_weights(theta):
    theta = np.asarray(theta, dtype=float)
    W = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    W[theta == 0.0] = (1.0, 0.0)
    W[theta == np.pi / 2] = (0.0, 1.0)
    return W


def direction_grid(D: int) -> np.ndarray:
    """``(D, 2)`` unit weights at evenly spaced angles from 0 to pi/2."""
    return _angle_weights(direction_angles(D))


@lru_cache(maxsize=64)
def _pair_solvers(coeff_key):
    """Inverse matrices for every non-parallel pair of lines (constraints + axes)."""
    M = np.array(coeff_key + ((1.0, 0.0), (0.0, 1.0)), dtype=float)
    pairs, invs = [], []
    L = M.shape[0]
    for i in range(L):
        for j in range(i + 1, L):
            A = M[[i, j]]
            det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
            if det == 0:
                continue
            pairs.append((i, j))
            invs.append(np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]]) / det)
    return M, np.array(pairs, dtype=np.intp), np.array(invs)


def _coeff_key(coeffs):
    return tuple(tuple(float(x) for x in row) for row in np.asarray(coeffs, dtype=float))


def _check_bounded(coeffs, w1, w2):
    coeffs = np.asarray(coeffs, dtype=float)
    if w1 > 0 and not np.any(coeffs[:, 0] > 0):
        raise ValueError("region is unbounded in R1")
    if w2 > 0 and not np.any(coeffs[:, 1] > 0):
        raise ValueError("region is unbounded in R2")


def _candidates(coeffs, C):
    """Feasible pairwise intersections for a batch of right-hand sides.

    Returns points ``(N, P, 2)`` and a feasibility mask ``(N, P)``.
    """
    M, pairs, invs = _pair_solvers(_coeff_key(coeffs))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    N, k = C.shape
    full = np.concatenate([C, np.zeros((N, 2))], axis=1)
    rhs = np.stack([full[:, pairs[:, 0]], full[:, pairs[:, 1]]], axis=-1)  # (N, P, 2)
    pts = np.einsum("pij,npj->npi", invs, rhs)
    A = M[:k]
    slack = C[:, None, :] - np.einsum("npi,ki->npk", pts, A)
    ok = np.all(slack >= -TOL, axis=-1) & np.all(pts >= -TOL, axis=-1)
    return pts, ok


def batch_support(coeffs, C, W, chunk_elems=4_000_000) -> np.ndarray:
    """Support values of N polytopes (shared normals) in D directions, ``(N, D)``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    for w1, w2 in W:
        _check_bounded(coeffs, w1, w2)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    N = C.shape[0]
    out = np.empty((N, W.shape[0]))
    _, pairs, _ = _pair_solvers(_coeff_key(coeffs))
    step = max(1, chunk_elems // max(1, len(pairs) * W.shape[0]))
    for s in range(0, N, step):
        pts, ok = _candidates(coeffs, C[s:s + step])
        vals = pts @ W.T  # (n, P, D)
        vals = np.where(ok[..., None], vals, -np.inf)
        out[s:s + step] = vals.max(axis=1)
    return out


def batch_support_paired(coeffs, C, W) -> np.ndarray:
    """Support of polytope i in its own direction W[i]; returns ``(N,)``."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    for w1, w2 in np.unique(W > 0, axis=0):
        _check_bounded(coeffs, float(w1), float(w2))
    pts, ok = _candidates(coeffs, C)
    vals = np.einsum("npi,ni->np", pts, np.broadcast_to(W, (pts.shape[0], 2)))
    return np.where(ok, vals, -np.inf).max(axis=1)


def support_value(polytope: RatePolytope, w1: float, w2: float) -> float:
    """max of w1*R1 + w2*R2 over the polytope."""
    w1, w2 = float(w1), float(w2)
    if w1 < 0 or w2 < 0 or (w1 == 0 and w2 == 0):
        raise ValueError("direction must be nonnegative and nonzero")
    return float(batch_support(polytope.coeffs, polytope.rhs, [[w1, w2]])[0, 0])


def _hull(points):
    """Convex hull (counter-clockwise, collinear points dropped)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= TOL * TOL:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= TOL * TOL:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _dedupe(points):
    kept = []
    for p in points:
        if not any(abs(p[0] - q[0]) <= TOL and abs(p[1] - q[1]) <= TOL for q in kept):
            kept.append(p)
    return kept


def vertices(polytope: RatePolytope) -> List[RatePoint]:
    """Extreme points of the polytope, sorted by r1 (then r2)."""
    _check_bounded(polytope.coeffs, 1.0, 1.0)
    pts, ok = _candidates(polytope.coeffs, polytope.rhs)
    cand = [(max(0.0, x), max(0.0, y)) for (x, y), good in zip(pts[0].tolist(), ok[0].tolist()) if good]
    if not cand:
        raise ValueError("empty region")
    ext = _hull(_dedupe(cand))
    return [RatePoint(x, y) for x, y in sorted(ext)]


def _point_in(polytope, r1, r2, tol=TOL):
    if r1 < -tol or r2 < -tol:
        return False
    return bool(np.all(polytope.coeffs @ np.array([r1, r2]) <= polytope.rhs + tol))


@dataclass(eq=False)
class RateRegion:
    """Union of polytopes with a cached support function.

    Membership is exact (member-wise); ``support`` describes the convex hull
    of the union, i.e. its time-sharing closure.
    """

    members: list
    directions: np.ndarray
    support: Optional[np.ndarray] = None
    argmember: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def weights(self):
        return _angle_weights(self.directions)

    def to_json(self):
        return {
            "directions": self.directions.tolist(),
            "support": None if self.support is None else self.support.tolist(),
            "members": [m.to_json() for m in self.members],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj):
        members = [RatePolytope.from_json(m) for m in obj["members"]]
        sup = obj.get("support")
        return cls(members, np.asarray(obj["directions"], float),
                   None if sup is None else np.asarray(sup, float), None, dict(obj.get("meta", {})))


def _member_support(members, W):
    S = np.empty((len(members), W.shape[0]))
    for i, m in enumerate(members):
        S[i] = batch_support(m.coeffs, m.rhs, W)[0]
    return S


def union_region(members, D: int = DEFAULT_DIRECTIONS) -> RateRegion:
    """Union of polytopes with support cached on ``D`` directions over [0, pi/2]."""
    members = list(members)
    if not members:
        raise ValueError("union needs at least one member")
    if D < 4:
        raise ValueError("need D >= 4 directions")
    W = direction_grid(D)
    S = _member_support(members, W)
    arg = np.argmax(S, axis=0)
    return RateRegion(members, direction_angles(D), S[arg, np.arange(D)], arg)


def contains_point(region, p) -> bool:
    """Exact union membership with absolute tolerance 1e-9."""
    r1, r2 = (p.r1, p.r2) if isinstance(p, RatePoint) else p
    members = region.members if isinstance(region, RateRegion) else [region]
    return any(_point_in(m, r1, r2) for m in members)


@dataclass
class ShiftReport:
    passed: bool
    delta: float
    margin: float
    worst_vertex: Optional[RatePoint]
    worst_shifted: Optional[RatePoint]
    records: list
    clamp: bool = True

    def to_json(self):
        return {
            "passed": self.passed,
            "delta": self.delta,
            "clamp": self.clamp,
            "margin": self.margin,
            "worst_vertex": None if self.worst_vertex is None else list(self.worst_vertex),
            "worst_shifted": None if self.worst_shifted is None else list(self.worst_shifted),
            "vertices": self.records,
        }


def shifted_containment(outer: RatePolytope, inner: RatePolytope, delta: float = 1.0,
                        clamp: bool = True) -> ShiftReport:
    """Check that every outer vertex moved down by ``delta`` per user lies in ``inner``.

    With ``clamp`` (the default) a shifted coordinate below zero is raised
    to zero before the test.  With ``clamp=False`` the shifted point is
    kept as is and only the inner half-planes are checked, which is the
    form a constraint-by-constraint gap argument delivers.  The margin of
    a shifted point is its smallest slack over the inner constraints
    (negative means violation).
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    A, c = inner.coeffs, inner.rhs
    records = []
    worst = None
    for v in vertices(outer):
        q = (max(v.r1 - delta, 0.0), max(v.r2 - delta, 0.0)) if clamp else (v.r1 - delta, v.r2 - delta)
        margin = float(np.min(c - A @ np.array(q)))
        records.append({"vertex": [v.r1, v.r2], "shifted": list(q), "margin": margin})
        if worst is None or margin < worst[0]:
            worst = (margin, v, RatePoint(*q))
    margin, wv, wq = worst
    return ShiftReport(margin >= -TOL, float(delta), margin, wv, wq, records, bool(clamp))


def boundary_polyline(region: RateRegion) -> List[RatePoint]:
    """Upper-right boundary of the convex hull of the union.

    Runs from the R2 axis to the R1 axis; both axis end points are included.
    """
    pts = [(0.0, 0.0)]
    for m in region.members:
        pts.extend((v.r1, v.r2) for v in vertices(m))
    hull = _hull(_dedupe(pts))
    # counter-clockwise from the origin: (0,0), (xmax,0), frontier, (0,ymax)
    if len(hull) == 1:
        return [RatePoint(0.0, 0.0)]
    if all(p[0] <= TOL for p in hull) or all(p[1] <= TOL for p in hull):
        return [RatePoint(x, y) for x, y in sorted(hull, key=lambda p: (p[0], -p[1]))]
    return [RatePoint(x, y) for x, y in reversed(hull[1:])]
