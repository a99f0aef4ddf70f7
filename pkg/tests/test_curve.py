"""Curve construction, group law, topology, and chart transforms."""

import numpy as np
import pytest

from cubic_moments import curve as cv
from cubic_moments import ternary
from cubic_moments.errors import (
    DegenerateLine,
    EmptyComponent,
    OffCurve,
    OrderViolation,
    RepeatedRoot,
)

DISC = cv.new_weierstrass(-1.0, (0.0, 1.0), True)  # y^2 = x^3 - x
CONN = cv.new_weierstrass(0.0, (0.0, 1.0), False)  # y^2 = x^3 + x


def random_point(c, rng):
    label = ["Oval", "Unbounded"][rng.integers(2)] if cv.topology(c).kind == "TwoComponents" else "Whole"
    if label == "Oval":
        return cv.component_point(c, label, rng.uniform(0, 2 * np.pi))
    return cv.component_point(c, label, rng.uniform(-0.9, 0.9))


def test_weierstrass_validation():
    with pytest.raises(RepeatedRoot):
        cv.new_weierstrass(0.0, (0.0, 1.0), True)
    with pytest.raises(OrderViolation):
        cv.new_weierstrass(1.0, (0.0, 2.0), True)
    with pytest.raises(RepeatedRoot):
        cv.new_weierstrass(0.0, (1.0, 0.0), False)  # im = 0 is a double root


def test_working_equation_vanishes_on_points():
    for c in (DISC, CONN):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = random_point(c, rng)
            assert abs(ternary.eval_form(c.working_equation, 3, p.working)) < 1e-12


def test_identity_and_inverse_exact():
    rng = np.random.default_rng(2)
    for c in (DISC, CONN):
        o = cv.point_at_infinity(c)
        for _ in range(10):
            p = random_point(c, rng)
            assert cv.points_equal(cv.add(c, p, o), p, tol=1e-12)
            assert cv.add(c, p, cv.neg(c, p)).at_infinity


def test_group_law_closure():
    rng = np.random.default_rng(3)
    for c in (DISC, CONN):
        for _ in range(50):
            p, q = random_point(c, rng), random_point(c, rng)
            s = cv.add(c, p, q)
            if not s.at_infinity:
                assert abs(cv.affine_residual(c, s.wx, s.wy)) < 1e-8


def test_group_law_associativity():
    rng = np.random.default_rng(4)
    for c in (DISC, CONN):
        for _ in range(25):
            p, q, r = (random_point(c, rng) for _ in range(3))
            lhs = cv.add(c, cv.add(c, p, q), r)
            rhs = cv.add(c, p, cv.add(c, q, r))
            assert cv.points_equal(lhs, rhs, tol=1e-7)


def test_two_torsion_structure():
    ts = cv.two_torsion(DISC)
    assert len(ts.all_real) == 4
    assert ts.all_real[0].at_infinity
    # doubling any 2-torsion point gives the identity
    for t in ts.all_real:
        assert cv.add(DISC, t, t).at_infinity
    t1, t2, t3 = ts.all_real[1:]
    assert cv.points_equal(cv.add(DISC, t1, t2), t3, tol=1e-10)
    # connected locus: only O and the single real branch point
    assert len(cv.two_torsion(CONN).all_real) == 2
    assert [p.at_infinity for p in cv.two_torsion(CONN).positive] == [True, False]


def test_topology_kinds_and_ranges():
    topo = cv.topology(DISC)
    assert topo.kind == "TwoComponents"
    assert topo.components["Oval"] == (-1.0, 0.0)
    lo, hi = topo.components["Unbounded"]
    assert lo == 1.0 and np.isinf(hi)
    topo2 = cv.topology(CONN)
    assert topo2.kind == "Connected"
    assert set(topo2.components) == {"Whole"}


def test_component_point_param_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(20):
        th = rng.uniform(0.05, 2 * np.pi - 0.05)
        p = cv.component_point(DISC, "Oval", th)
        label, par = cv.component_param(DISC, p)
        assert label == "Oval"
        q = cv.component_point(DISC, label, par)
        assert cv.points_equal(p, q, tol=1e-9)
    for _ in range(20):
        s = rng.uniform(-0.9, 0.9)
        p = cv.component_point(CONN, "Whole", s)
        label, par = cv.component_param(CONN, p)
        q = cv.component_point(CONN, label, par)
        assert cv.points_equal(p, q, tol=1e-9)
    with pytest.raises(EmptyComponent):
        cv.component_point(CONN, "Oval", 0.3)


def test_point_from_affine_validates():
    p = cv.point_from_affine(DISC, 2.0, np.sqrt(6.0))
    assert abs(p.wx - 2.0) < 1e-12
    with pytest.raises(OffCurve):
        cv.point_from_affine(DISC, 2.0, 1.0)


def test_sample_real_locus_covers_components():
    pts = cv.sample_real_locus(DISC, 12, seed=7)
    labels = {cv.component_param(DISC, p)[0] for p in pts}
    assert labels == {"Oval", "Unbounded"}
    ys = [p.wy for p in pts]
    assert min(ys) < 0 < max(ys)  # both branches
    affs = cv.sample_real_locus(CONN, 8, affine_only=True, seed=8)
    assert all(abs(p.working[0]) > 1e-6 for p in affs)


def test_divisor_sum_matches_iterated_add():
    rng = np.random.default_rng(9)
    pts = [random_point(CONN, rng) for _ in range(4)]
    acc = cv.point_at_infinity(CONN)
    for p in pts:
        acc = cv.add(CONN, acc, p)
    s = cv.divisor_sum(CONN, [(p, 1) for p in pts])
    assert cv.points_equal(acc, s, tol=1e-9)
    s2 = cv.divisor_sum(CONN, [(pts[0], 2), (pts[1], 1)])
    acc2 = cv.add(CONN, cv.add(CONN, pts[0], pts[0]), pts[1])
    assert cv.points_equal(acc2, s2, tol=1e-9)


def test_points_at_infinity_identity_chart():
    pinf = cv.points_at_infinity(DISC)
    assert len(pinf) == 1
    point, mult = pinf[0]
    assert point.at_infinity and mult == 3


def test_transform_line_to_infinity():
    rng = np.random.default_rng(10)
    p = cv.component_point(CONN, "Whole", 0.4)
    q = cv.component_point(CONN, "Whole", -0.55)
    cprime = cv.transform_line_to_infinity(CONN, p, q)
    # the chosen points now have working first coordinate zero
    for pt in (p, q):
        v = cprime.transform @ pt.working
        assert abs(v[0]) / np.linalg.norm(v) < 1e-10
    # a chord through two real points meets the cubic in a third real point
    assert len(cv.points_at_infinity(cprime)) >= 2
    with pytest.raises(DegenerateLine):
        cv.transform_line_to_infinity(CONN, p, p)


def test_with_infinity_line_preserves_curve():
    c2 = cv.with_infinity_line(DISC, np.array([0.3, 1.0, -0.2]))
    # same underlying Weierstrass data, new chart
    assert c2.w.a1 == DISC.w.a1 and not c2.identity_chart
    # points transported through the new chart still satisfy its equation
    rng = np.random.default_rng(11)
    for _ in range(5):
        p = random_point(DISC, rng)
        v = c2.transform @ p.working
        assert abs(ternary.eval_form(c2.working_equation, 3, v)) < 1e-10
