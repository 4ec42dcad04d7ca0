"""Regime classification, exact capacity results and the one-bit gap certificate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import (
    PowerPolicy,
    RatePolytope,
    batch_constraints,
    expect,
    inner_polytope,
    inner_terms,
    outer_polytope_relaxed,
    outer_terms,
    polytope_from_row,
    _psi,
)
from .ensemble import StateEnsemble, csit_determines_inr
from .geometry import TOL, ShiftReport, shifted_containment
from .policies import CsitHypothesisError, PolicyGrid, _enumerate_powers, _as_budget, etw_split_policy

__all__ = [
    "REGIMES",
    "RegimeError",
    "GapCertificate",
    "classify_regime",
    "is_uniformly_strong",
    "is_uniformly_mixed",
    "strong_capacity_polytope",
    "mixed_sum_capacity",
    "mixed_sum_value",
    "one_bit_gap_certificate",
    "empirical_gap",
    "TERM_PAIRING",
]

REGIMES = ("uniformly-strong", "uniformly-mixed", "uniformly-weak", "mixed-over-time")


class RegimeError(ValueError):
    """The ensemble is outside the interference regime an operation needs."""


def is_uniformly_strong(ensemble: StateEnsemble) -> bool:
    return bool(np.all(ensemble.g21 >= ensemble.g11) and np.all(ensemble.g12 >= ensemble.g22))


def is_uniformly_mixed(ensemble: StateEnsemble) -> bool:
    # rx1 sees strong interference (g12 >= g22), rx2 weak (g21 <= g11)
    return bool(np.all(ensemble.g21 <= ensemble.g11) and np.all(ensemble.g12 >= ensemble.g22))


def classify_regime(ensemble: StateEnsemble) -> str:
    if is_uniformly_strong(ensemble):
        return "uniformly-strong"
    if is_uniformly_mixed(ensemble):
        return "uniformly-mixed"
    if np.all(ensemble.g21 < ensemble.g11) and np.all(ensemble.g12 < ensemble.g22):
        return "uniformly-weak"
    return "mixed-over-time"


def strong_capacity_polytope(ensemble, csit1, csit2, phi1: PowerPolicy, phi2: PowerPolicy) -> RatePolytope:
    """Capacity polytope at fixed powers when both receivers see strong interference a.s."""
    if not is_uniformly_strong(ensemble):
        raise RegimeError(f"ensemble is {classify_regime(ensemble)}, not uniformly-strong")
    for m in (csit1, csit2):
        m.check_bound(ensemble)
    row = batch_constraints("Eq55", ensemble, phi1.per_state(), phi2.per_state())
    return polytope_from_row("Eq55", row, {"policies": {"phi1": list(phi1.values), "phi2": list(phi2.values)}})


def mixed_sum_value(ensemble, p1, p2):
    """min of the two sum-rate expressions for per-state powers (batched over rows)."""
    s11, s12, s21, s22 = (ensemble.gains[:, i] ** 2 for i in range(4))
    a, c = s11 * p1, s21 * p1
    b, d = s22 * p2, s12 * p2
    ti = expect(ensemble, _psi(a) + _psi(b / (c + 1.0)))
    mac = expect(ensemble, _psi(a + d))
    return np.minimum(ti, mac)


def mixed_sum_capacity(ensemble, csit1, csit2, budget, grid: Optional[PolicyGrid] = None):
    """Sum capacity under uniformly mixed interference, maximised over the power grid.

    Returns ``(value, (phi1, phi2))``; ties go to the first policy pair in
    enumeration order.
    """
    if not is_uniformly_mixed(ensemble):
        raise RegimeError(f"ensemble is {classify_regime(ensemble)}, not uniformly-mixed")
    grid = grid or PolicyGrid()
    budget = _as_budget(budget)
    pairs = power_grid_pairs(ensemble, csit1, csit2, budget, grid)
    p1 = np.array([p for p, _ in pairs])[:, csit1.labels]
    p2 = np.array([q for _, q in pairs])[:, csit2.labels]
    vals = np.atleast_1d(mixed_sum_value(ensemble, p1, p2))
    k = int(np.argmax(vals))
    return float(vals[k]), (PowerPolicy(csit1, pairs[k][0]), PowerPolicy(csit2, pairs[k][1]))


def power_grid_pairs(ensemble, csit1, csit2, budget, grid):
    """Cartesian product of both transmitters' feasible grid power vectors."""
    budget = _as_budget(budget)
    out = []
    l1 = ([(0.0,) * csit1.size] if budget.p1 == 0 else
          _enumerate_powers(csit1.symbol_probabilities(ensemble).tolist(), budget.p1, grid))
    l2 = ([(0.0,) * csit2.size] if budget.p2 == 0 else
          _enumerate_powers(csit2.symbol_probabilities(ensemble).tolist(), budget.p2, grid))
    for p in l1:
        for q in l2:
            out.append((p, q))
    return out


# ---------------------------------------------------------------------------
# one-bit gap

# constraint -> names of its psi terms; outer and inner share the names
TERM_PAIRING = {
    "c1": ("r1",),
    "c2": ("r2",),
    "c3": ("A1", "C2"),
    "c4": ("A2", "C1"),
    "c5": ("B1", "B2"),
    "c6": ("A1", "B2", "C1"),
    "c7": ("A2", "B1", "C2"),
}


@dataclass
class GapCertificate:
    records: list
    shift: ShiftReport
    delta: float
    verdict: bool
    outer: RatePolytope = field(repr=False)
    inner: RatePolytope = field(repr=False)
    splits: dict = field(default_factory=dict)
    halfplane_shift: Optional[ShiftReport] = None

    @property
    def halfplane_verdict(self):
        """Term margins plus the unclamped shift test (no axis clamping)."""
        ok = all(t["margin"] >= -TOL for r in self.records for t in r["terms"])
        return bool(ok and self.halfplane_shift.passed)

    @property
    def min_term_margin(self):
        return min(t["margin"] for r in self.records for t in r["terms"])

    def to_json(self):
        return {
            "verdict": "pass" if self.verdict else "fail",
            "delta": self.delta,
            "min_term_margin": self.min_term_margin,
            "constraints": self.records,
            "shifted_containment": self.shift.to_json(),
            "halfplane_verdict": "pass" if self.halfplane_verdict else "fail",
            "halfplane_shift": self.halfplane_shift.to_json(),
            "splits": self.splits,
            "outer": self.outer.to_json(),
            "inner": self.inner.to_json(),
        }


def one_bit_gap_certificate(ensemble, csit1, csit2, phi1: PowerPolicy, phi2: PowerPolicy,
                            delta: float = 1.0) -> GapCertificate:
    """Compare the relaxed outer polytope with the HK polytope at the noise-level splits.

    Each outer constraint is split into psi terms that each exceed their
    inner counterpart by at most ``delta`` bits, and every outer vertex moved
    down by ``delta`` per user (negative coordinates raised to zero) must
    land in the inner polytope.  The unclamped variant of the vertex test is
    reported alongside as ``halfplane_shift``: on an axis vertex the clamped
    test can fail at fixed powers even though every term margin holds.
    Raises :class:`CsitHypothesisError` when a transmitter's CSIT does not
    reveal the cross gain it creates.
    """
    for link, csit in ((1, csit1), (2, csit2)):
        if not csit_determines_inr(csit, ensemble, link):
            raise CsitHypothesisError(
                f"transmitter {link} CSIT does not determine its cross gain; no gap guarantee applies"
            )
    alpha, beta = etw_split_policy(phi1, phi2, ensemble)
    outer = outer_polytope_relaxed(ensemble, csit1, csit2, phi1, phi2)
    inner = inner_polytope(ensemble, csit1, csit2, phi1, phi2, alpha, beta)

    p1, p2 = phi1.per_state(), phi2.per_state()
    ot = {k: expect(ensemble, v) for k, v in outer_terms(ensemble, p1, p2).items()}
    it = {k: expect(ensemble, v) for k, v in inner_terms(ensemble, p1, p2, alpha.per_state(), beta.per_state()).items()}

    records = []
    for ko, ki in zip(outer.constraints, inner.constraints):
        key = ko.tag.split("-")[1]
        terms = []
        for name in TERM_PAIRING[key]:
            terms.append({
                "term": name,
                "outer": ot[name],
                "inner": it[name],
                "margin": it[name] + delta - ot[name],
            })
        records.append({
            "outer_tag": ko.tag,
            "inner_tag": ki.tag,
            "a": ko.a,
            "b": ko.b,
            "outer_value": ko.c,
            "inner_value": ki.c,
            # outer value minus the sum of its terms; zero up to rounding
            "decomposition_residual": ko.c - sum(t["outer"] for t in terms),
            "constraint_margin": ki.c + (ko.a + ko.b) * delta - ko.c,
            "terms": terms,
        })
    shift = shifted_containment(outer, inner, delta)
    ok_terms = all(t["margin"] >= -TOL for r in records for t in r["terms"])
    return GapCertificate(records, shift, float(delta), bool(ok_terms and shift.passed), outer, inner,
                          {"alpha": list(alpha.values), "beta": list(beta.values)},
                          shifted_containment(outer, inner, delta, clamp=False))


def empirical_gap(outer: RatePolytope, inner: RatePolytope, hi: float = 1.0, tol: float = 1e-3):
    """Smallest per-user shift (to ``tol``) that maps every outer vertex into ``inner``.

    Returns ``None`` when even ``hi`` fails.
    """
    if not shifted_containment(outer, inner, hi).passed:
        return None
    lo = 0.0
    if shifted_containment(outer, inner, lo).passed:
        return 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if shifted_containment(outer, inner, mid).passed:
            hi = mid
        else:
            lo = mid
    return hi
