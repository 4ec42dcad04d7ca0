"""Closed-form rate constraints of the inner and outer bounds.

All rates are in bits.  Per support point we write

    a = g11^2 phi1   (signal at rx1)      d = g12^2 phi2   (interference at rx1)
    b = g22^2 phi2   (signal at rx2)      c = g21^2 phi1   (interference at rx2)

and every constraint right-hand side is an expectation of psi-expressions in
these four quantities.  The heavy lifting is done by batched kernels that take
per-state policy arrays of shape ``(N, n)`` so the policy search can score many
candidates at once; the single-policy functions below are thin wrappers with
``N = 1``, so both paths produce bitwise identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import ChannelState, CsitMap, StateEnsemble, Budget, expect

__all__ = [
    "psi",
    "COEFFICIENT_SET",
    "RateConstraint",
    "RatePolytope",
    "PowerPolicy",
    "SplitPolicy",
    "BOUND_LAYOUTS",
    "inner_terms",
    "outer_terms",
    "batch_constraints",
    "inner_polytope",
    "outer_polytope_full",
    "outer_polytope_relaxed",
    "static_weak_outer",
    "kramer_polytope",
    "etw_weak_polytope",
    "mixed_r1_2r2_pair",
]

COEFFICIENT_SET = frozenset({(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)})
POWER_TOL = 1e-9


def psi(x):
    """log2(1 + x); accepts scalars or arrays."""
    if np.ndim(x) == 0:
        x = float(x)
        if not math.isfinite(x) or x < 0:
            raise ValueError(f"psi needs a finite nonnegative argument, got {x!r}")
        return math.log2(1.0 + x)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("psi needs finite nonnegative arguments")
    return np.log2(1.0 + x)


def _psi(x):
    # unchecked kernel version; arguments are nonnegative by construction
    return np.log2(1.0 + x)


@dataclass(frozen=True)
class RateConstraint:
    """``a*R1 + b*R2 <= c``."""

    a: int
    b: int
    c: float
    tag: str

    def __post_init__(self):
        if (self.a, self.b) not in COEFFICIENT_SET:
            raise ValueError(f"coefficients {(self.a, self.b)} not in {sorted(COEFFICIENT_SET)}")
        c = float(self.c)
        if not math.isfinite(c):
            raise ValueError(f"{self.tag}: non-finite bound {c!r}")
        if c < 0:
            # tiny negatives come from rounding in differences of psi terms
            if c < -1e-12:
                raise ValueError(f"{self.tag}: negative bound {c!r}")
            c = 0.0
        object.__setattr__(self, "c", c)

    def to_json(self):
        return {"a": self.a, "b": self.b, "c": self.c, "tag": self.tag}


@dataclass(frozen=True, eq=False)
class RatePolytope:
    """Region {R >= 0 : all constraints}; nonnegativity is implicit."""

    constraints: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        cons = tuple(self.constraints)
        if not cons:
            raise ValueError("a polytope needs at least one constraint")
        object.__setattr__(self, "constraints", cons)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([(k.a, k.b) for k in self.constraints], dtype=float)

    @property
    def rhs(self) -> np.ndarray:
        return np.array([k.c for k in self.constraints], dtype=float)

    @property
    def tags(self):
        return [k.tag for k in self.constraints]

    def by_tag(self, tag) -> RateConstraint:
        for k in self.constraints:
            if k.tag == tag:
                return k
        raise KeyError(tag)

    def subset(self, tags, **meta) -> "RatePolytope":
        return RatePolytope(tuple(self.by_tag(t) for t in tags), {**self.meta, **meta})

    def to_json(self):
        return {"constraints": [k.to_json() for k in self.constraints], "meta": self.meta}

    @classmethod
    def from_json(cls, obj):
        cons = tuple(RateConstraint(int(k["a"]), int(k["b"]), float(k["c"]), str(k["tag"])) for k in obj["constraints"])
        return cls(cons, dict(obj.get("meta", {})))


@dataclass(frozen=True, eq=False)
class PowerPolicy:
    """phi(e) for every CSIT symbol e of ``csit``."""

    csit: CsitMap
    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != self.csit.size:
            raise ValueError(f"power policy has {len(vals)} values for {self.csit.size} CSIT symbols")
        for v in vals:
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"power values must be finite and >= 0, got {v!r}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, csit, p):
        return cls(csit, (p,) * csit.size)

    def per_state(self) -> np.ndarray:
        return np.asarray(self.values)[self.csit.labels]

    def expected_power(self, ensemble: StateEnsemble) -> float:
        return expect(ensemble, self.per_state())

    def is_feasible(self, ensemble, budget: float) -> bool:
        return self.expected_power(ensemble) <= budget + POWER_TOL


@dataclass(frozen=True, eq=False)
class SplitPolicy:
    """Private-power fractions, indexed by CSIT symbol or by support point."""

    domain: str
    values: tuple
    csit: Optional[CsitMap] = None

    def __post_init__(self):
        if self.domain not in ("csit", "state"):
            raise ValueError(f"split domain must be 'csit' or 'state', got {self.domain!r}")
        if self.domain == "csit" and self.csit is None:
            raise ValueError("csit-indexed split policy needs its CSIT map")
        vals = tuple(float(v) for v in self.values)
        for v in vals:
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"split values must lie in [0, 1], got {v!r}")
        if self.domain == "csit" and len(vals) != self.csit.size:
            raise ValueError(f"split policy has {len(vals)} values for {self.csit.size} CSIT symbols")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant_csit(cls, csit, v):
        return cls("csit", (v,) * csit.size, csit)

    @classmethod
    def constant_state(cls, n, v):
        return cls("state", (v,) * n)

    def per_state(self, n=None) -> np.ndarray:
        if self.domain == "csit":
            return np.asarray(self.values)[self.csit.labels]
        if n is not None and len(self.values) != n:
            raise ValueError(f"state-indexed split policy has {len(self.values)} values for {n} states")
        return np.asarray(self.values)


# ---------------------------------------------------------------------------
# constraint layouts: (a, b, tag suffix)

_SEVEN = [(1, 0, "c1"), (0, 1, "c2"), (1, 1, "c3"), (1, 1, "c4"), (1, 1, "c5"), (2, 1, "c6"), (1, 2, "c7")]
_NINE = [
    (1, 0, "c1a"), (1, 0, "c1b"), (0, 1, "c2a"), (0, 1, "c2b"),
    (1, 1, "c3"), (1, 1, "c4"), (1, 1, "c5"), (2, 1, "c6"), (1, 2, "c7"),
]
_FOUR = [(1, 0, "c1"), (0, 1, "c2"), (1, 1, "c3"), (1, 1, "c4")]

BOUND_LAYOUTS = {
    "Eq2": [(a, b, "Eq2-" + t) for a, b, t in _SEVEN],
    "Eq45": [(a, b, "Eq45-" + t) for a, b, t in _SEVEN],
    "Eq18": [(a, b, "Eq18-" + t) for a, b, t in _NINE],
    "Eq39": [(a, b, "Eq39-" + t) for a, b, t in _NINE],
    "Kramer": [(a, b, "Eq39-" + t) for a, b, t in _NINE[:6]],
    "ETW": [(a, b, "Eq39-" + t) for a, b, t in _NINE if t not in ("c1b", "c2b")],
    "Eq55": [(a, b, "Eq55-" + t) for a, b, t in _FOUR],
}


def _squares(ensemble):
    g = ensemble.gains
    return g[:, 0] ** 2, g[:, 1] ** 2, g[:, 2] ** 2, g[:, 3] ** 2


def _weak_masks(ensemble):
    # strict "<" is the weak branch; ties go to the strong branch
    weak1 = ensemble.g12 < ensemble.g22
    weak2 = ensemble.g21 < ensemble.g11
    return weak1, weak2


def inner_terms(ensemble, p1, p2, al, be):
    """Per-state psi terms of the HK inner bound (arrays broadcast to ``(N, n)``).

    Names follow the pairing used by the one-bit comparison: ``A1`` is the
    private part of user 1 seen at rx1, ``B1`` the common/private mix at rx1,
    ``C1`` rx1 decoding everything but the other private part, ``r1`` the
    single-user term; index 2 is the mirror image.
    """
    s11, s12, s21, s22 = _squares(ensemble)
    a, c = s11 * p1, s21 * p1
    b, d = s22 * p2, s12 * p2
    den1 = d * be + 1.0
    den2 = c * al + 1.0
    return {
        "r1": _psi(a / den1),
        "r2": _psi(b / den2),
        "A1": _psi(al * a / den1),
        "A2": _psi(be * b / den2),
        "B1": _psi((al * a + d * (1.0 - be)) / den1),
        "B2": _psi((c * (1.0 - al) + be * b) / den2),
        "C1": _psi((a + d * (1.0 - be)) / den1),
        "C2": _psi((c * (1.0 - al) + b) / den2),
    }


def outer_terms(ensemble, p1, p2):
    """Per-state psi terms of the relaxed outer bound (split-free)."""
    s11, s12, s21, s22 = _squares(ensemble)
    a, c = s11 * p1, s21 * p1
    b, d = s22 * p2, s12 * p2
    weak1, weak2 = _weak_masks(ensemble)
    pa, pb = _psi(a), _psi(b)
    return {
        "r1": pa,
        "r2": pb,
        "A1": np.where(weak2, pa - _psi(c), 0.0),
        "A2": np.where(weak1, pb - _psi(d), 0.0),
        "B1": _psi(d + a / (c + 1.0)),
        "B2": _psi(c + b / (d + 1.0)),
        "C1": _psi(a + d),
        "C2": _psi(c + b),
        # branch forms of the two single-decoder sum constraints, as written
        "S3": np.where(weak2, pa + _psi(b / (c + 1.0)), _psi(c + b)),
        "S4": np.where(weak1, pb + _psi(a / (d + 1.0)), _psi(a + d)),
    }


def _E(ensemble, x):
    x = np.broadcast_to(x, np.broadcast_shapes(np.shape(x), (len(ensemble),)))
    return expect(ensemble, np.ascontiguousarray(x))


def _inner_batch(ensemble, p1, p2, al, be):
    t = {k: _E(ensemble, v) for k, v in inner_terms(ensemble, p1, p2, al, be).items()}
    return np.stack([
        t["r1"], t["r2"],
        t["A1"] + t["C2"],
        t["C1"] + t["A2"],
        t["B1"] + t["B2"],
        t["C1"] + t["A1"] + t["B2"],
        t["A2"] + t["C2"] + t["B1"],
    ], axis=-1)


def _relaxed_batch(ensemble, p1, p2):
    t = {k: _E(ensemble, v) for k, v in outer_terms(ensemble, p1, p2).items()}
    return np.stack([
        t["r1"], t["r2"], t["S3"], t["S4"],
        t["B1"] + t["B2"],
        t["A1"] + t["B2"] + t["C1"],
        t["A2"] + t["B1"] + t["C2"],
    ], axis=-1)


def _full_batch(ensemble, p1, p2, al, be):
    s11, s12, s21, s22 = _squares(ensemble)
    a, c = s11 * p1, s21 * p1
    b, d = s22 * p2, s12 * p2
    weak1, weak2 = _weak_masks(ensemble)
    # rx1-side expressions carry alpha(S), rx2-side carry beta(S)
    u1 = _psi((a + d * (1.0 - al)) / (d * al + 1.0))
    u2 = _psi((c * (1.0 - be) + b) / (c * be + 1.0))
    strong1 = _psi(a + d)
    strong2 = _psi(c + b)
    E = lambda x: _E(ensemble, x)  # noqa: E731
    B1 = E(_psi(d + a / (c + 1.0)))
    B2 = E(_psi(c + b / (d + 1.0)))
    return np.stack([
        E(_psi(a)),
        E(np.where(weak1, u1, strong1)),
        E(_psi(b)),
        E(np.where(weak2, u2, strong2)),
        E(np.where(weak2, _psi(be * a) + u2, strong2)),
        E(np.where(weak1, _psi(al * b) + u1, strong1)),
        B1 + B2,
        E(np.where(weak2, _psi(be * a) - _psi(be * c), 0.0)) + B2 + E(strong1),
        E(np.where(weak1, _psi(al * b) - _psi(al * d), 0.0)) + B1 + E(strong2),
    ], axis=-1)


def _strong_batch(ensemble, p1, p2):
    s11, s12, s21, s22 = _squares(ensemble)
    a, c = s11 * p1, s21 * p1
    b, d = s22 * p2, s12 * p2
    E = lambda x: _E(ensemble, x)  # noqa: E731
    return np.stack([E(_psi(a)), E(_psi(b)), E(_psi(a + d)), E(_psi(c + b))], axis=-1)


def batch_constraints(bound, ensemble, p1, p2, al=None, be=None) -> np.ndarray:
    """Right-hand sides for a batch of per-state policies.

    ``p1, p2, al, be`` broadcast against ``(N, n)``; the result has shape
    ``(N, k)`` with columns in ``BOUND_LAYOUTS[bound]`` order.  Static bounds
    (Eq39/Kramer/ETW) are evaluated through the fading machinery on a
    singleton ensemble.
    """
    p1, p2 = np.asarray(p1, dtype=float), np.asarray(p2, dtype=float)
    al = None if al is None else np.asarray(al, dtype=float)
    be = None if be is None else np.asarray(be, dtype=float)
    if bound == "Eq2":
        return _inner_batch(ensemble, p1, p2, al, be)
    if bound == "Eq45":
        return _relaxed_batch(ensemble, p1, p2)
    if bound in ("Eq18", "Eq39"):
        return _full_batch(ensemble, p1, p2, al, be)
    if bound == "Kramer":
        return _full_batch(ensemble, p1, p2, al, be)[..., :6]
    if bound == "ETW":
        one = np.ones_like(np.asarray(p1, dtype=float))
        return _full_batch(ensemble, p1, p2, one, one)[..., [0, 2, 4, 5, 6, 7, 8]]
    if bound == "Eq55":
        return _strong_batch(ensemble, p1, p2)
    raise ValueError(f"unknown bound {bound!r}")


def polytope_from_row(bound, row, meta=None) -> RatePolytope:
    row = np.asarray(row, dtype=float)
    cons = []
    for (a, b, tag), c in zip(BOUND_LAYOUTS[bound], row.tolist()):
        if not math.isfinite(c):
            raise FloatingPointError(f"{tag}: non-finite bound {c!r}")
        cons.append(RateConstraint(a, b, c, tag))
    return RatePolytope(tuple(cons), {"bound": bound, **(meta or {})})


# ---------------------------------------------------------------------------
# single-policy entry points


def _check_power(phi, csit, name):
    if not isinstance(phi, PowerPolicy):
        raise TypeError(f"{name} must be a PowerPolicy")
    if phi.csit is not csit and not np.array_equal(phi.csit.labels, csit.labels):
        raise ValueError(f"{name} is bound to a different CSIT map")


def _check_split_csit(split, csit, name):
    if split.domain != "csit":
        raise ValueError(f"{name} must be indexed by CSIT symbol")
    if split.csit is not csit and not np.array_equal(split.csit.labels, csit.labels):
        raise ValueError(f"{name} is bound to a different CSIT map")


def _policy_meta(phi1, phi2, alpha=None, beta=None):
    meta = {"phi1": list(phi1.values), "phi2": list(phi2.values)}
    if alpha is not None:
        meta["alpha"] = list(alpha.values)
        meta["beta"] = list(beta.values)
    return {"policies": meta}


def inner_polytope(ensemble, csit1, csit2, phi1, phi2, alpha, beta) -> RatePolytope:
    """HK achievable polytope at fixed power and split policies (7 constraints)."""
    for m in (csit1, csit2):
        m.check_bound(ensemble)
    _check_power(phi1, csit1, "phi1")
    _check_power(phi2, csit2, "phi2")
    _check_split_csit(alpha, csit1, "alpha")
    _check_split_csit(beta, csit2, "beta")
    row = batch_constraints("Eq2", ensemble, phi1.per_state(), phi2.per_state(),
                            alpha.per_state(), beta.per_state())
    return polytope_from_row("Eq2", row, _policy_meta(phi1, phi2, alpha, beta))


def outer_polytope_full(ensemble, csit1, csit2, phi1, phi2, alphaS, betaS) -> RatePolytope:
    """Outer bound with state-dependent splits; the two single-rate minima are kept as separate rows."""
    for m in (csit1, csit2):
        m.check_bound(ensemble)
    _check_power(phi1, csit1, "phi1")
    _check_power(phi2, csit2, "phi2")
    n = len(ensemble)
    for s, name in ((alphaS, "alphaS"), (betaS, "betaS")):
        if s.domain != "state":
            raise ValueError(f"{name} must be state-indexed")
    row = batch_constraints("Eq18", ensemble, phi1.per_state(), phi2.per_state(),
                            alphaS.per_state(n), betaS.per_state(n))
    return polytope_from_row("Eq18", row, _policy_meta(phi1, phi2, alphaS, betaS))


def outer_polytope_relaxed(ensemble, csit1, csit2, phi1, phi2) -> RatePolytope:
    """Split-free relaxed outer bound at fixed power policies (7 constraints)."""
    for m in (csit1, csit2):
        m.check_bound(ensemble)
    _check_power(phi1, csit1, "phi1")
    _check_power(phi2, csit2, "phi2")
    row = batch_constraints("Eq45", ensemble, phi1.per_state(), phi2.per_state())
    return polytope_from_row("Eq45", row, _policy_meta(phi1, phi2))


# ---------------------------------------------------------------------------
# static (non-fading) reductions, written out in scalar form


def _static_weak_args(state, budget):
    if not isinstance(state, ChannelState):
        state = ChannelState(*state)
    if not isinstance(budget, Budget):
        budget = Budget(*budget)
    if state.g11 != 1.0 or state.g22 != 1.0:
        raise ValueError("static bounds assume normalised direct gains g11 = g22 = 1")
    if not (state.g12 < 1.0 and state.g21 < 1.0):
        raise ValueError("static weak bounds need g12 < 1 and g21 < 1")
    return state, budget


def _static_weak_rows(state, budget, alpha, beta):
    h12, h21 = state.g12 ** 2, state.g21 ** 2
    P1, P2 = budget.p1, budget.p2
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise ValueError("alpha and beta must lie in [0, 1]")
    ps = lambda x: math.log2(1.0 + x)  # noqa: E731
    r1b = ps((P1 + h12 * (1 - alpha) * P2) / (h12 * alpha * P2 + 1))
    r2b = ps((h21 * (1 - beta) * P1 + P2) / (h21 * beta * P1 + 1))
    genie1 = ps(h12 * P2 + P1 / (h21 * P1 + 1))
    genie2 = ps(h21 * P1 + P2 / (h12 * P2 + 1))
    return [
        ps(P1),
        r1b,
        ps(P2),
        r2b,
        ps(beta * P1) + r2b,
        ps(alpha * P2) + r1b,
        genie1 + genie2,
        ps(beta * P1) - ps(h21 * beta * P1) + genie2 + ps(P1 + h12 * P2),
        ps(alpha * P2) - ps(h12 * alpha * P2) + genie1 + ps(h21 * P1 + P2),
    ]


def static_weak_outer(state, budget, alpha: float, beta: float) -> RatePolytope:
    """Static weak-interference outer bound at scalar splits (g11 = g22 = 1)."""
    state, budget = _static_weak_args(state, budget)
    rows = _static_weak_rows(state, budget, alpha, beta)
    return polytope_from_row("Eq39", rows, {"alpha": alpha, "beta": beta})


def kramer_polytope(state, budget, alpha: float, beta: float) -> RatePolytope:
    """First four constraints (six rows, two minima) of the static weak bound."""
    state, budget = _static_weak_args(state, budget)
    rows = _static_weak_rows(state, budget, alpha, beta)[:6]
    return polytope_from_row("Kramer", rows, {"alpha": alpha, "beta": beta})


def etw_weak_polytope(state, budget) -> RatePolytope:
    """Static weak bound at alpha = beta = 1 without the two auxiliary single-rate rows."""
    state, budget = _static_weak_args(state, budget)
    rows = _static_weak_rows(state, budget, 1.0, 1.0)
    return polytope_from_row("ETW", [rows[i] for i in (0, 2, 4, 5, 6, 7, 8)])


def mixed_r1_2r2_pair(state, budget):
    """(ours, etw) bounds on R1 + 2 R2 for a static mixed channel with g21 < 1 <= g12."""
    if not isinstance(state, ChannelState):
        state = ChannelState(*state)
    if not isinstance(budget, Budget):
        budget = Budget(*budget)
    if state.g11 != 1.0 or state.g22 != 1.0:
        raise ValueError("static bounds assume normalised direct gains g11 = g22 = 1")
    if not (state.g21 < 1.0 <= state.g12):
        raise ValueError("mixed static pair needs g21 < 1 <= g12")
    h12, h21 = state.g12 ** 2, state.g21 ** 2
    P1, P2 = budget.p1, budget.p2
    ours = psi(h12 * P2 + P1 / (h21 * P1 + 1)) + psi(h21 * P1 + P2)
    extra = psi(P2 / (h12 * P2 + 1))
    return ours, ours + extra
