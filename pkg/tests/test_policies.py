import itertools
import math

import numpy as np
import pytest

import oracles
from fadingic.bounds import PowerPolicy
from fadingic.ensemble import Budget, csit_from_quantizer, make_discrete_ensemble
from fadingic.geometry import direction_grid, support_value
from fadingic.policies import (
    CsitHypothesisError,
    PolicyGrid,
    etw_split_policy,
    extend_region,
    feasible_power_policies,
    maximize_weighted_sum,
    power_pairs,
    trace_boundary,
)

COARSE = PolicyGrid(power_step=0.5, split_step=0.25, cap=2.0)


@pytest.fixture
def two_state():
    return make_discrete_ensemble([(1.0, 0.3, 0.4, 1.0), (0.6, 0.8, 0.2, 1.3)], [0.5, 0.5])


def test_power_grid_enumeration_count_and_feasibility(two_state):
    c = csit_from_quantizer(two_state, 1, "full-state")
    pols = feasible_power_policies(c, two_state, 1.0, PolicyGrid())
    # levels are multiples of 0.25 up to 4; each symbol has probability 1/2
    assert len(pols) == sum(1 for i in range(17) for j in range(17) if i + j <= 8)
    assert all(p.is_feasible(two_state, 1.0) for p in pols)
    assert [p.values for p in pols] == sorted(p.values for p in pols)
    assert any(p.values == (1.0, 1.0) for p in pols)


def test_full_power_is_always_a_candidate():
    ens = make_discrete_ensemble([(1, 0.5, 0.5, 1), (1, 0.2, 0.2, 1)], [0.3, 0.7])
    c = csit_from_quantizer(ens, 1, "full-state")
    pols = feasible_power_policies(c, ens, 1.0, PolicyGrid(power_step=0.3))
    assert any(p.values == (1.0, 1.0) for p in pols)


def test_zero_budget_gives_silence(two_state):
    c = csit_from_quantizer(two_state, 1, "none")
    assert [p.values for p in feasible_power_policies(c, two_state, 0.0, PolicyGrid())] == [(0.0,)]


def test_grid_validation():
    with pytest.raises(ValueError):
        PolicyGrid(power_step=0.0)
    with pytest.raises(ValueError):
        PolicyGrid(cap=0.5)
    with pytest.raises(ValueError):
        PolicyGrid(split_domain="bogus")
    assert PolicyGrid(split_step=0.3).split_values() == pytest.approx([0, 0.3, 0.6, 0.9, 1.0])


def test_noise_level_split_values(two_state):
    c1 = csit_from_quantizer(two_state, 1, "inr-magnitude")
    c2 = csit_from_quantizer(two_state, 2, "inr-magnitude")
    al, be = etw_split_policy(PowerPolicy(c1, (10.0, 0.0)), PowerPolicy(c2, (2.0, 50.0)), two_state)
    # g21 = 0.4, 0.2 and g12 = 0.3, 0.8
    assert al.values == pytest.approx((1 / 1.6, 1.0))
    assert be.values == pytest.approx((1.0, 1 / 32.0))


def test_noise_level_split_needs_inr_knowledge(two_state):
    c1 = csit_from_quantizer(two_state, 1, "none")
    c2 = csit_from_quantizer(two_state, 2, "full-state")
    with pytest.raises(CsitHypothesisError):
        etw_split_policy(PowerPolicy.constant(c1, 1.0), PowerPolicy(c2, (1.0, 1.0)), two_state)


def _waterfill_rate(ens, P):
    """Exact best E psi(g11^2 phi) under E phi <= P (full CSIT at tx1)."""
    g = ens.g11 ** 2
    w = ens.weights
    lo, hi = 0.0, P + 1.0 / g.min() + 1.0
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        if np.sum(w * np.maximum(mu - 1.0 / g, 0.0)) > P:
            hi = mu
        else:
            lo = mu
    phi = np.maximum(lo - 1.0 / g, 0.0)
    return float(np.sum(w * np.log2(1.0 + g * phi)))


def test_single_user_rate_is_between_grid_and_waterfilling(two_state):
    c1 = csit_from_quantizer(two_state, 1, "full-state")
    c2 = csit_from_quantizer(two_state, 2, "full-state")
    _, grid_val = maximize_weighted_sum("Eq45", two_state, c1, c2, (1.0, 1.0), (1.0, 0.0), refine=0)
    pol, val = maximize_weighted_sum("Eq45", two_state, c1, c2, (1.0, 1.0), (1.0, 0.0), refine=3)
    best = _waterfill_rate(two_state, 1.0)
    # the grid contains (0.75, 1.25) etc.; check grid optimum by brute force
    brute = max(
        0.5 * math.log2(1 + 1.0 * a) + 0.5 * math.log2(1 + 0.36 * b)
        for a, b in itertools.product(np.arange(0, 4.01, 0.25), repeat=2) if 0.5 * (a + b) <= 1 + 1e-12
    )
    assert grid_val == pytest.approx(brute, abs=1e-12)
    assert grid_val - 1e-12 <= val <= best + 1e-12
    assert pol["phi1"].is_feasible(two_state, 1.0)


def test_weighted_sum_matches_brute_force_over_grid():
    ens = make_discrete_ensemble([(1.0, 0.5, 0.7, 1.0)], [1.0])
    c1, c2 = csit_from_quantizer(ens, 1, "none"), csit_from_quantizer(ens, 2, "none")
    pol, val = maximize_weighted_sum("Eq2", ens, c1, c2, (2.0, 2.0), (1.0, 1.0), grid=COARSE, refine=0)
    coeffs = [(1, 0), (0, 1), (1, 1), (1, 1), (1, 1), (2, 1), (1, 2)]
    best = 0.0
    for p1, p2 in itertools.product([0, 1, 2, 3, 4], repeat=2):
        if p1 > 2 or p2 > 2:
            continue
        for a, b in itertools.product([0, 0.25, 0.5, 0.75, 1.0], repeat=2):
            rows = oracles.inner_rows(ens, [p1], [p2], [a], [b])
            v = max(x + y for x, y in oracles.brute_vertices(coeffs, rows))
            best = max(best, v)
    assert val >= best - 1e-12
    assert support_value(pol["polytope"], 1, 1) == pytest.approx(val, abs=1e-12)


def test_weighted_sum_rejects_bad_direction(two_state):
    c = csit_from_quantizer(two_state, 1, "none")
    with pytest.raises(ValueError):
        maximize_weighted_sum("Eq45", two_state, c, c, (1, 1), (0.0, 0.0))


def test_candidate_limit_is_enforced(two_state):
    c1 = csit_from_quantizer(two_state, 1, "full-state")
    c2 = csit_from_quantizer(two_state, 2, "full-state")
    with pytest.raises(ValueError, match="max_candidates"):
        maximize_weighted_sum("Eq2", two_state, c1, c2, (1, 1), (1, 1), grid=PolicyGrid(max_candidates=10))


def test_static_bound_needs_single_state(two_state):
    c = csit_from_quantizer(two_state, 1, "none")
    with pytest.raises(ValueError, match="single-state"):
        trace_boundary("Eq39", two_state, c, c, (1, 1), D=9)


def test_trace_is_deterministic_and_consistent(two_state):
    c1 = csit_from_quantizer(two_state, 1, "inr-magnitude")
    c2 = csit_from_quantizer(two_state, 2, "inr-magnitude")
    r1 = trace_boundary("Eq2", two_state, c1, c2, Budget(1, 1), D=17, grid=COARSE)
    r2 = trace_boundary("Eq2", two_state, c1, c2, Budget(1, 1), D=17, grid=COARSE)
    assert r1.support.tobytes() == r2.support.tobytes()
    # cached support equals the maximum of member supports
    for j, (w1, w2) in enumerate(direction_grid(17)):
        best = max(support_value(m, w1, w2) for m in r1.members)
        assert r1.support[j] == pytest.approx(best, abs=1e-12)


def test_extend_region_only_adds(two_state):
    c1 = csit_from_quantizer(two_state, 1, "none")
    c2 = csit_from_quantizer(two_state, 2, "none")
    outer = trace_boundary("Eq45", two_state, c1, c2, (1, 1), D=17, grid=COARSE)
    inner = trace_boundary("Eq2", two_state, c1, c2, (1, 1), D=17, grid=COARSE, seeds=power_pairs(outer))
    wider = extend_region(outer, power_pairs(inner))
    assert np.all(wider.support >= outer.support - 1e-15)
    assert np.all(wider.support >= inner.support - 1e-9)
    with pytest.raises(ValueError):
        extend_region(inner, power_pairs(outer))


def test_full_outer_split_domains(two_state):
    c1 = csit_from_quantizer(two_state, 1, "none")
    c2 = csit_from_quantizer(two_state, 2, "none")
    sup = {}
    for dom in ("constant", "remark32", "state"):
        g = PolicyGrid(power_step=0.5, split_step=0.25, cap=2.0, split_domain=dom)
        sup[dom] = trace_boundary("Eq18", two_state, c1, c2, (1, 1), D=9, grid=g, refine=0).support
    # finer split parametrisations contain the coarser unions on the grid
    assert np.all(sup["state"] >= sup["constant"] - 1e-12)
    assert np.all(sup["remark32"] >= sup["constant"] - 1e-12)
