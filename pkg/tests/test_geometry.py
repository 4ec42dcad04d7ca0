import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from fadingic.bounds import RateConstraint, RatePolytope
from fadingic.geometry import (
    RatePoint,
    RateRegion,
    batch_support,
    boundary_polyline,
    contains_point,
    direction_grid,
    shifted_containment,
    support_value,
    union_region,
    vertices,
)


def poly(*rows):
    return RatePolytope(tuple(RateConstraint(a, b, c, f"t{i}") for i, (a, b, c) in enumerate(rows)))


SQUARE_CUT = poly((1, 0, 1.0), (0, 1, 1.0), (1, 1, 1.5))


def test_vertices_of_cut_square():
    got = [tuple(v) for v in vertices(SQUARE_CUT)]
    assert got == pytest.approx([(0, 0), (0, 1), (0.5, 1), (1, 0), (1, 0.5)])


def test_support_values_of_cut_square():
    assert support_value(SQUARE_CUT, 1, 1) == pytest.approx(1.5)
    assert support_value(SQUARE_CUT, 2, 1) == pytest.approx(2.5)
    assert support_value(SQUARE_CUT, 1, 0) == pytest.approx(1.0)


def test_support_rejects_bad_direction():
    with pytest.raises(ValueError):
        support_value(SQUARE_CUT, 0, 0)
    with pytest.raises(ValueError):
        support_value(SQUARE_CUT, -1, 1)


def test_unbounded_region_is_an_error():
    with pytest.raises(ValueError, match="unbounded"):
        support_value(poly((1, 0, 1.0)), 0, 1)


def test_redundant_constraint_does_not_add_vertices():
    p = poly((1, 0, 1.0), (0, 1, 1.0), (1, 1, 5.0), (2, 1, 10.0))
    assert len(vertices(p)) == 4


def test_union_membership_is_not_convexified():
    a = poly((1, 0, 2.0), (0, 1, 1.0))
    b = poly((1, 0, 1.0), (0, 1, 2.0))
    reg = union_region([a, b], D=41)
    assert contains_point(reg, (1.9, 0.9))
    assert not contains_point(reg, RatePoint(1.4, 1.4))
    # the cached support is that of the convex hull
    assert reg.support[20] == pytest.approx(3.0 / math.sqrt(2))


def test_union_needs_members_and_directions():
    with pytest.raises(ValueError):
        union_region([], D=41)
    with pytest.raises(ValueError):
        union_region([SQUARE_CUT], D=3)


def test_direction_grid_endpoints_are_exact():
    W = direction_grid(721)
    assert W[0].tolist() == [1.0, 0.0]
    assert W[-1].tolist() == [0.0, 1.0]
    np.testing.assert_allclose(np.hypot(W[:, 0], W[:, 1]), 1.0)


def test_region_json_round_trip():
    reg = union_region([SQUARE_CUT], D=11)
    back = RateRegion.from_json(json.loads(json.dumps(reg.to_json())))
    np.testing.assert_array_equal(back.support, reg.support)
    assert len(back.members) == 1


def test_shifted_containment_of_polytope_in_itself():
    rep = shifted_containment(SQUARE_CUT, SQUARE_CUT, 0.0)
    assert rep.passed and rep.margin == pytest.approx(0.0)


def test_shifted_containment_reports_worst_vertex():
    small = poly((1, 0, 0.5), (0, 1, 0.5))
    rep = shifted_containment(SQUARE_CUT, small, 0.25)
    assert not rep.passed
    assert rep.margin == pytest.approx(-0.25)
    assert shifted_containment(SQUARE_CUT, small, 0.5).passed


def test_boundary_polyline_runs_axis_to_axis():
    pts = [tuple(p) for p in boundary_polyline(union_region([SQUARE_CUT], D=11))]
    assert pts == pytest.approx([(0, 1), (0.5, 1), (1, 0.5), (1, 0)])


def _random_poly(rng):
    rows = [(1, 0), (0, 1), (1, 1), (1, 1), (1, 1), (2, 1), (1, 2)]
    c = rng.uniform(0.2, 3.0, 7)
    return poly(*[(a, b, v) for (a, b), v in zip(rows, c)])


@pytest.mark.parametrize("seed", range(10))
def test_support_matches_brute_force_grid(seed):
    rng = np.random.default_rng(seed)
    p = _random_poly(rng)
    for w1, w2 in direction_grid(7):
        brute = oracles.brute_support(p.coeffs.tolist(), p.rhs.tolist(), w1, w2)
        exact = support_value(p, w1, w2)
        assert brute <= exact + 1e-9
        assert exact - brute <= 1e-3 * (w1 + w2) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000))
def test_vertices_match_exhaustive_intersection(seed):
    rng = np.random.default_rng(seed)
    p = _random_poly(rng)
    verts = [tuple(v) for v in vertices(p)]
    cand = oracles.brute_vertices(p.coeffs.tolist(), p.rhs.tolist())
    # every reported vertex is a feasible intersection ...
    for v in verts:
        assert min(math.dist(v, q) for q in cand) <= 1e-9
    # ... and every feasible intersection lies in the hull of the reported ones
    for q in cand:
        for w1, w2 in direction_grid(9):
            assert w1 * q[0] + w2 * q[1] <= max(w1 * x + w2 * y for x, y in verts) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.floats(0.0, math.pi / 2))
def test_support_is_attained_at_a_vertex(seed, theta):
    p = _random_poly(np.random.default_rng(seed))
    w1, w2 = math.cos(theta), math.sin(theta)
    if w1 + w2 == 0:
        return
    best = max(w1 * v.r1 + w2 * v.r2 for v in vertices(p))
    assert support_value(p, max(w1, 0.0), max(w2, 0.0)) == pytest.approx(best, abs=1e-9)


def test_batch_support_shape_and_consistency():
    rng = np.random.default_rng(0)
    ps = [_random_poly(rng) for _ in range(5)]
    C = np.array([p.rhs for p in ps])
    W = direction_grid(13)
    S = batch_support(ps[0].coeffs, C, W)
    assert S.shape == (5, 13)
    for i, p in enumerate(ps):
        for j, (w1, w2) in enumerate(W):
            assert S[i, j] == support_value(p, w1, w2)


def test_spec_shift_examples():
    outer = poly((1, 0, 2.0), (0, 1, 2.0))
    inner = poly((1, 0, 1.0), (0, 1, 1.0))
    rep = shifted_containment(outer, inner, 1.0)
    assert rep.passed and rep.margin == pytest.approx(0.0)
    rep = shifted_containment(outer, inner, 0.5)
    assert not rep.passed and rep.margin == pytest.approx(-0.5)


def test_unclamped_shift_keeps_negative_coordinates():
    outer = poly((1, 0, 3.0), (0, 1, 0.5), (1, 1, 3.0))
    inner = poly((1, 0, 3.0), (0, 1, 3.0), (1, 1, 1.5))
    # (3, 0) -> clamped (2, 0) violates R1 + R2 <= 1.5; unclamped (2, -1) does not
    assert not shifted_containment(outer, inner, 1.0).passed
    rep = shifted_containment(outer, inner, 1.0, clamp=False)
    assert rep.passed and not rep.clamp
