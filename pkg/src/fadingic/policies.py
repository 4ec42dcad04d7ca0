"""Searching the policy unions.

The bounds are unions over power policies phi1, phi2 (one value per CSIT
symbol) and, for some bounds, split policies alpha, beta.  We enumerate a
finite grid exhaustively, then polish each direction's best candidate by
single-coordinate golden-section steps that are only accepted when they
improve the weighted sum.  Every reported point is therefore a certified
member of the union; no global optimality is claimed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .bounds import (
    BOUND_LAYOUTS,
    POWER_TOL,
    PowerPolicy,
    SplitPolicy,
    batch_constraints,
    polytope_from_row,
)
from .ensemble import Budget, CsitMap, StateEnsemble, csit_determines_inr
from .geometry import (
    DEFAULT_DIRECTIONS,
    RateRegion,
    batch_support,
    batch_support_paired,
    direction_angles,
    direction_grid,
)

__all__ = [
    "PolicyGrid",
    "CsitHypothesisError",
    "SEARCHABLE_BOUNDS",
    "feasible_power_policies",
    "etw_split_policy",
    "maximize_weighted_sum",
    "trace_boundary",
    "SearchResult",
    "extend_region",
    "power_pairs",
]

SEARCHABLE_BOUNDS = ("Eq2", "Eq18", "Eq45", "Eq55", "Eq39", "Kramer", "ETW")
_STATIC = ("Eq39", "Kramer", "ETW")
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class CsitHypothesisError(ValueError):
    """The CSIT maps do not reveal the cross gains the gap result needs."""


@dataclass(frozen=True)
class PolicyGrid:
    """Discretisation of the policy unions.

    Power values are ``k * power_step * P`` for ``k = 0, 1, ...`` up to
    ``cap * P``.  Split values are multiples of ``split_step`` in [0, 1].
    ``split_domain`` picks how the state-dependent splits of the full outer
    bound are parametrised: one shared value (``constant``), one value per
    (g22, E2) / (g11, E1) class (``remark32``, valid for i.i.d. states) or
    one value per support point (``state``).  A boundary trace polishes
    only ``refine_directions`` evenly spaced directions; their polytopes
    join the member set seen by every direction.
    """

    power_step: float = 0.25
    split_step: float = 0.1
    cap: float = 4.0
    split_product_limit: int = 256
    max_candidates: int = 200_000
    golden_iters: int = 20
    refine_directions: int = 91
    split_domain: str = "constant"

    def __post_init__(self):
        for name in ("power_step", "split_step"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")
        if self.cap < 1.0:
            raise ValueError("cap must be >= 1 so full power stays representable")
        if self.split_domain not in ("constant", "remark32", "state"):
            raise ValueError(f"unknown split domain {self.split_domain!r}")

    def split_values(self):
        k = int(math.floor(1.0 / self.split_step + 1e-9))
        vals = [min(1.0, i * self.split_step) for i in range(k + 1)]
        if vals[-1] < 1.0:
            vals.append(1.0)
        return vals


def _power_levels(P, grid):
    kmax = int(math.floor(grid.cap / grid.power_step + 1e-9))
    return [k * grid.power_step * P for k in range(kmax + 1)]


def _enumerate_powers(probs, P, grid):
    """Lexicographic grid vectors with expected power <= P (pruned DFS)."""
    levels = _power_levels(P, grid)
    m = len(probs)
    out = []
    cur = [0.0] * m

    def rec(i, spent):
        if i == m:
            out.append(tuple(cur))
            return
        for v in levels:
            s = spent + probs[i] * v
            if s > P + POWER_TOL:
                break
            cur[i] = v
            rec(i + 1, s)
        cur[i] = 0.0

    rec(0, 0.0)
    full = (float(P),) * m
    if full not in out:
        out.append(full)
    return out


def feasible_power_policies(csit: CsitMap, ensemble: StateEnsemble, P: float, grid: PolicyGrid) -> List[PowerPolicy]:
    """All grid power policies of one transmitter meeting the average power budget."""
    if P < 0:
        raise ValueError("budget must be >= 0")
    probs = csit.symbol_probabilities(ensemble).tolist()
    if P == 0:
        return [PowerPolicy(csit, (0.0,) * csit.size)]
    return [PowerPolicy(csit, v) for v in _enumerate_powers(probs, P, grid)]


def _symbol_cross_gain(csit, ensemble, link):
    col = ensemble.g21 if link == 1 else ensemble.g12
    if not csit_determines_inr(csit, ensemble, link):
        which = "g21" if link == 1 else "g12"
        raise CsitHypothesisError(
            f"CSIT of transmitter {link} does not determine {which}; the split assignment is undefined"
        )
    g = np.zeros(csit.size)
    g[csit.labels] = col
    return g


def _eq46(gain_sq_per_symbol, phi_values):
    prod = gain_sq_per_symbol * np.asarray(phi_values, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(prod > 0, np.minimum(1.0, 1.0 / np.where(prod > 0, prod, 1.0)), 1.0)


def etw_split_policy(phi1: PowerPolicy, phi2: PowerPolicy, ensemble: StateEnsemble):
    """Private fractions that put each private signal at the noise level of the other receiver.

    alpha(e) = min(1, 1 / (g21^2 phi1(e))) and beta(e) = min(1, 1 / (g12^2 phi2(e))),
    with the value 1 wherever the interference term vanishes.  Requires each
    CSIT map to determine its transmitter's cross gain.
    """
    g21 = _symbol_cross_gain(phi1.csit, ensemble, 1)
    g12 = _symbol_cross_gain(phi2.csit, ensemble, 2)
    alpha = SplitPolicy("csit", tuple(_eq46(g21 ** 2, phi1.values)), phi1.csit)
    beta = SplitPolicy("csit", tuple(_eq46(g12 ** 2, phi2.values)), phi2.csit)
    return alpha, beta


# ---------------------------------------------------------------------------
# search machinery


def _class_labels(keys):
    index = {}
    return np.array([index.setdefault(k, len(index)) for k in keys], dtype=np.intp), len(index)


class _Family:
    """Parametrisation of one bound's policy union as a flat vector theta."""

    def __init__(self, bound, ensemble, csit1, csit2, budget, grid):
        if bound not in SEARCHABLE_BOUNDS:
            raise ValueError(f"unknown bound {bound!r}; expected one of {SEARCHABLE_BOUNDS}")
        self.bound = bound
        self.ensemble = ensemble
        self.csit1, self.csit2 = csit1, csit2
        self.budget = budget
        self.grid = grid
        self.n = len(ensemble)
        self.coeffs = np.array([(a, b) for a, b, _ in BOUND_LAYOUTS[bound]], dtype=float)
        self.static = bound in _STATIC
        if self.static:
            if self.n != 1:
                raise ValueError(f"{bound} is a static bound and needs a single-state ensemble")
            self.m1 = self.m2 = 0
        else:
            csit1.check_bound(ensemble)
            csit2.check_bound(ensemble)
            self.m1, self.m2 = csit1.size, csit2.size
        self.prob1 = csit1.symbol_probabilities(ensemble) if not self.static else None
        self.prob2 = csit2.symbol_probabilities(ensemble) if not self.static else None

        # split parametrisation: (alpha labels, count), (beta labels, count)
        if bound == "Eq2":
            self.al_lab, self.ka = csit1.labels, csit1.size
            self.be_lab, self.kb = csit2.labels, csit2.size
        elif bound == "Eq18":
            dom = grid.split_domain
            if dom == "constant":
                self.al_lab, self.ka = np.zeros(self.n, np.intp), 1
                self.be_lab, self.kb = np.zeros(self.n, np.intp), 1
            elif dom == "remark32":
                self.al_lab, self.ka = _class_labels(zip(ensemble.g22.tolist(), csit2.labels.tolist()))
                self.be_lab, self.kb = _class_labels(zip(ensemble.g11.tolist(), csit1.labels.tolist()))
            else:
                self.al_lab, self.ka = np.arange(self.n), self.n
                self.be_lab, self.kb = np.arange(self.n), self.n
        elif bound in ("Eq39", "Kramer"):
            self.al_lab, self.ka = np.zeros(1, np.intp), 1
            self.be_lab, self.kb = np.zeros(1, np.intp), 1
        else:
            self.al_lab, self.ka = None, 0
            self.be_lab, self.kb = None, 0
        self.dim = self.m1 + self.m2 + self.ka + self.kb

    # slices of theta
    @property
    def s_p1(self):
        return slice(0, self.m1)

    @property
    def s_p2(self):
        return slice(self.m1, self.m1 + self.m2)

    @property
    def s_al(self):
        o = self.m1 + self.m2
        return slice(o, o + self.ka)

    @property
    def s_be(self):
        o = self.m1 + self.m2 + self.ka
        return slice(o, o + self.kb)

    def per_state(self, theta):
        theta = np.atleast_2d(theta)
        N = theta.shape[0]
        if self.static:
            p1 = np.full((N, 1), self.budget.p1)
            p2 = np.full((N, 1), self.budget.p2)
        else:
            p1 = np.ascontiguousarray(theta[:, self.s_p1][:, self.csit1.labels])
            p2 = np.ascontiguousarray(theta[:, self.s_p2][:, self.csit2.labels])
        al = be = None
        if self.ka:
            al = np.ascontiguousarray(theta[:, self.s_al][:, self.al_lab])
            be = np.ascontiguousarray(theta[:, self.s_be][:, self.be_lab])
        return p1, p2, al, be

    def constraints(self, theta, chunk_elems=2_000_000):
        theta = np.atleast_2d(theta)
        N = theta.shape[0]
        out = np.empty((N, len(self.coeffs)))
        step = max(1, chunk_elems // max(1, self.n))
        for s in range(0, N, step):
            p1, p2, al, be = self.per_state(theta[s:s + step])
            out[s:s + step] = batch_constraints(self.bound, self.ensemble, p1, p2, al, be)
        return out

    def polytope(self, theta):
        return polytope_from_row(self.bound, self.constraints(theta)[0], {"policies": self.describe(theta)})

    def describe(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = {}
        if not self.static:
            tx1 = {}
            for e, name in enumerate(self.csit1.names):
                tx1[name] = {"phi": float(theta[self.s_p1][e])}
                if self.bound == "Eq2":
                    tx1[name]["alpha"] = float(theta[self.s_al][e])
            tx2 = {}
            for e, name in enumerate(self.csit2.names):
                tx2[name] = {"phi": float(theta[self.s_p2][e])}
                if self.bound == "Eq2":
                    tx2[name]["beta"] = float(theta[self.s_be][e])
            out["tx1"], out["tx2"] = tx1, tx2
        if self.ka and self.bound != "Eq2":
            out["alpha"] = theta[self.s_al].tolist()
            out["beta"] = theta[self.s_be].tolist()
        return out

    def policies(self, theta):
        """Typed policy objects for a parameter vector."""
        theta = np.asarray(theta, dtype=float)
        res = {}
        if not self.static:
            res["phi1"] = PowerPolicy(self.csit1, theta[self.s_p1])
            res["phi2"] = PowerPolicy(self.csit2, theta[self.s_p2])
        if self.bound == "Eq2":
            res["alpha"] = SplitPolicy("csit", theta[self.s_al], self.csit1)
            res["beta"] = SplitPolicy("csit", theta[self.s_be], self.csit2)
        elif self.ka:
            p = self.per_state(theta)
            res["alpha"] = SplitPolicy("state", p[2][0])
            res["beta"] = SplitPolicy("state", p[3][0])
        return res

    # candidate enumeration -------------------------------------------------
    def _split_lists(self, k):
        vals = self.grid.split_values()
        if len(vals) ** k <= self.grid.split_product_limit:
            return [tuple(v) for v in itertools.product(vals, repeat=k)]
        return [(v,) * k for v in vals]

    def candidates(self, seeds=()):
        if self.static:
            p_pairs = [((), ())]
        else:
            if self.budget.p1 == 0:
                l1 = [(0.0,) * self.m1]
            else:
                l1 = _enumerate_powers(self.prob1.tolist(), self.budget.p1, self.grid)
            if self.budget.p2 == 0:
                l2 = [(0.0,) * self.m2]
            else:
                l2 = _enumerate_powers(self.prob2.tolist(), self.budget.p2, self.grid)
            p_pairs = list(itertools.product(l1, l2))
            seen = set(p_pairs)
            for s1, s2 in seeds:
                key = (tuple(float(x) for x in s1), tuple(float(x) for x in s2))
                if key not in seen:
                    seen.add(key)
                    p_pairs.append(key)
        if not self.ka:
            rows = [p + q for p, q in p_pairs]
            return np.array(rows, dtype=float).reshape(len(rows), self.dim)
        al_list = self._split_lists(self.ka)
        be_list = self._split_lists(self.kb)
        eq46 = None
        if self.bound == "Eq2":
            try:
                g21 = _symbol_cross_gain(self.csit1, self.ensemble, 1)
                g12 = _symbol_cross_gain(self.csit2, self.ensemble, 2)
                eq46 = (g21 ** 2, g12 ** 2)
            except CsitHypothesisError:
                eq46 = None
        count = len(p_pairs) * (len(al_list) + (eq46 is not None)) * (len(be_list) + (eq46 is not None))
        if count > self.grid.max_candidates:
            raise ValueError(
                f"{self.bound}: {count} grid candidates exceed max_candidates={self.grid.max_candidates}; "
                "coarsen power_step/split_step or shrink the CSIT alphabets"
            )
        rows = []
        for p, q in p_pairs:
            als, bes = al_list, be_list
            if eq46 is not None:
                a46 = tuple(_eq46(eq46[0], p).tolist())
                b46 = tuple(_eq46(eq46[1], q).tolist())
                als = als + [a46] if a46 not in als else als
                bes = bes + [b46] if b46 not in bes else bes
            for a in als:
                for b in bes:
                    rows.append(p + q + a + b)
        return np.array(rows, dtype=float)

    # coordinate bounds for refinement -------------------------------------
    def coordinate_range(self, theta, j):
        """Feasible interval of coordinate j for each row of theta, keeping the budget."""
        if j < self.m1 + self.m2:
            if j < self.m1:
                probs, P, blk, e = self.prob1, self.budget.p1, self.s_p1, j
            else:
                probs, P, blk, e = self.prob2, self.budget.p2, self.s_p2, j - self.m1
            vals = theta[:, blk]
            others = vals @ probs - vals[:, e] * probs[e]
            hi = np.clip((P - others) / probs[e], 0.0, self.grid.cap * P)
            return np.zeros(theta.shape[0]), hi
        return np.zeros(theta.shape[0]), np.ones(theta.shape[0])


@dataclass
class SearchResult:
    thetas: np.ndarray        # best parameters: grid stage per direction, then refined rows
    values: np.ndarray        # weighted-sum value of each row in its own direction
    grid_values: np.ndarray   # value of the grid-stage start of each row
    family: _Family


def _objective(fam, theta, W):
    C = fam.constraints(theta)
    return batch_support_paired(fam.coeffs, C, W)


def _refine(fam, thetas, values, W, rounds):
    thetas = thetas.copy()
    values = values.copy()
    iters = fam.grid.golden_iters
    for _ in range(rounds):
        for j in range(fam.dim):
            lo, hi = fam.coordinate_range(thetas, j)
            active = hi - lo > 1e-12
            if not active.any():
                continue
            idx = np.nonzero(active)[0]
            T = thetas[idx]
            Wi = W[idx]
            a, b = lo[idx].copy(), hi[idx].copy()

            def at(x):
                Z = T.copy()
                Z[:, j] = x
                return Z

            x1 = b - _GOLDEN * (b - a)
            x2 = a + _GOLDEN * (b - a)
            f1 = _objective(fam, at(x1), Wi)
            f2 = _objective(fam, at(x2), Wi)
            for _ in range(iters):
                left = f1 >= f2  # keep [a, x2]
                a = np.where(left, a, x1)
                b = np.where(left, x2, b)
                nx1 = np.where(left, b - _GOLDEN * (b - a), x2)
                nx2 = np.where(left, x1, a + _GOLDEN * (b - a))
                nf1_known = np.where(left, np.nan, f2)
                nf2_known = np.where(left, f1, np.nan)
                probe = np.where(left, nx1, nx2)
                fp = _objective(fam, at(probe), Wi)
                f1 = np.where(left, fp, nf1_known)
                f2 = np.where(left, nf2_known, fp)
                x1, x2 = nx1, nx2
            best_x = np.where(f1 >= f2, x1, x2)
            best_f = np.maximum(f1, f2)
            for edge in (lo[idx], hi[idx]):
                fe = _objective(fam, at(edge), Wi)
                take = fe > best_f
                best_x = np.where(take, edge, best_x)
                best_f = np.where(take, fe, best_f)
            improve = best_f > values[idx]
            sel = idx[improve]
            thetas[sel, j] = best_x[improve]
            values[sel] = best_f[improve]
    return thetas, values


def _search(fam, W, refine, seeds=(), refine_idx=None):
    cand = fam.candidates(seeds)
    C = fam.constraints(cand)
    S = batch_support(fam.coeffs, C, W)  # (N, D)
    arg = np.argmax(S, axis=0)
    thetas = cand[arg]
    values = S[arg, np.arange(W.shape[0])]
    grid_values = values.copy()
    if refine > 0 and fam.dim > 0:
        idx = np.arange(W.shape[0]) if refine_idx is None else np.asarray(refine_idx)
        t, v = _refine(fam, thetas[idx], values[idx], W[idx], refine)
        thetas = np.concatenate([thetas, t])
        values = np.concatenate([values, v])
        grid_values = np.concatenate([grid_values, grid_values[idx]])
    return SearchResult(thetas, values, grid_values, fam)


def _as_budget(budget):
    return budget if isinstance(budget, Budget) else Budget(*budget)


def maximize_weighted_sum(bound, ensemble, csit1, csit2, budget, w, grid: Optional[PolicyGrid] = None, refine: int = 2):
    """Best grid-plus-refinement policies for the weighted sum ``w1 R1 + w2 R2``.

    Returns ``(policies, value)`` where ``policies`` maps ``phi1``, ``phi2``
    (and ``alpha``, ``beta`` where the bound has splits) to policy objects
    and ``value`` is the support of the resulting polytope in direction w.
    """
    grid = grid or PolicyGrid()
    fam = _Family(bound, ensemble, csit1, csit2, _as_budget(budget), grid)
    W = np.asarray([w], dtype=float)
    if np.any(W < 0) or not np.any(W > 0):
        raise ValueError("direction must be nonnegative and nonzero")
    try:
        res = _search(fam, W, refine)
    except (ValueError, FloatingPointError) as exc:
        raise type(exc)(f"{bound} search failed: {exc}") from exc
    theta = res.thetas[-1]
    pol = fam.policies(theta)
    pol["polytope"] = fam.polytope(theta)
    return pol, float(res.values[-1])


def trace_boundary(bound, ensemble, csit1, csit2, budget, D: int = DEFAULT_DIRECTIONS,
                   grid: Optional[PolicyGrid] = None, refine: int = 1, seeds: Sequence = ()) -> RateRegion:
    """Sweep D directions and collect the best polytope of each as a union.

    ``seeds`` are extra ``(phi1_values, phi2_values)`` pairs added to the
    power grid, e.g. the optimisers of another bound.
    """
    grid = grid or PolicyGrid()
    if D < 4:
        raise ValueError("need D >= 4 directions")
    fam = _Family(bound, ensemble, csit1, csit2, _as_budget(budget), grid)
    W = direction_grid(D)
    nref = min(D, grid.refine_directions)
    refine_idx = np.unique(np.round(np.linspace(0, D - 1, nref)).astype(np.intp))
    res = _search(fam, W, refine, seeds, refine_idx)
    # distinct parameter vectors in first-seen order become the members
    uniq, first = np.unique(res.thetas, axis=0, return_index=True)
    order = np.sort(first)
    thetas = res.thetas[order]
    C = fam.constraints(thetas)
    S = batch_support(fam.coeffs, C, W)
    arg = np.argmax(S, axis=0)
    members = [polytope_from_row(bound, C[i], {"policies": fam.describe(thetas[i])}) for i in range(len(order))]
    region = RateRegion(members, direction_angles(D), S[arg, np.arange(D)], arg,
                        {"bound": bound, "thetas": thetas.tolist()})
    region.family = fam
    region.search = res
    return region


def extend_region(region: RateRegion, power_pairs) -> RateRegion:
    """Add members evaluated at extra power policies (split-free bounds only)."""
    fam = region.family
    if fam.ka:
        raise ValueError("extend_region only applies to bounds without split policies")
    extra = np.array([tuple(p) + tuple(q) for p, q in power_pairs], dtype=float).reshape(-1, fam.dim)
    thetas = np.concatenate([np.asarray(region.meta["thetas"], dtype=float).reshape(-1, fam.dim), extra])
    _, first = np.unique(thetas, axis=0, return_index=True)
    thetas = thetas[np.sort(first)]
    W = region.weights
    C = fam.constraints(thetas)
    S = batch_support(fam.coeffs, C, W)
    arg = np.argmax(S, axis=0)
    members = [polytope_from_row(fam.bound, C[i], {"policies": fam.describe(thetas[i])}) for i in range(len(thetas))]
    out = RateRegion(members, region.directions, S[arg, np.arange(len(W))], arg,
                     {**region.meta, "thetas": thetas.tolist()})
    out.family = fam
    return out


def power_pairs(region: RateRegion):
    """(phi1, phi2) value tuples of every member of a traced region."""
    fam = region.family
    T = np.asarray(region.meta["thetas"], dtype=float).reshape(-1, fam.dim)
    return [(tuple(t[fam.s_p1]), tuple(t[fam.s_p2])) for t in T]
