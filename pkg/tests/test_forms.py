"""Local jets, doubly-vanishing interpolation, extreme quadrics, certificates."""

import numpy as np
import pytest

from cubic_moments import curve as cv
from cubic_moments import forms
from cubic_moments import ternary
from cubic_moments.errors import NoQuadric, RankAmbiguous, VerificationFailed

DISC = cv.new_weierstrass(-1.0, (0.0, 1.0), True)
CONN = cv.new_weierstrass(0.0, (0.0, 1.0), False)


def class_atoms(c, cls_index, rng, tol=5e-2):
    """Three distinct atoms whose divisor sum is the requested torsion point."""
    ts = cv.two_torsion(c)
    target = ts.all_real[cls_index]
    while True:
        pts = cv.sample_real_locus(c, 2, affine_only=True,
                                   seed=int(rng.integers(2 ** 31)))
        last = cv.add(c, target, cv.neg(c, cv.add(c, pts[0], pts[1])))
        if last.at_infinity:
            continue
        atoms = pts + [last]
        if any(cv.points_equal(x, y, tol=tol)
               for i, x in enumerate(atoms) for y in atoms[i + 1:]):
            continue
        return atoms


def test_local_series_parametrizes_curve():
    # substituting the jet into the curve equation kills all tracked orders
    rng = np.random.default_rng(0)
    for c in (DISC, CONN):
        for _ in range(5):
            p = cv.sample_real_locus(c, 1, seed=int(rng.integers(2 ** 31)))[0]
            order = 4
            gamma = forms.local_series(c.working_equation, 3, p.working, order)
            # compose the curve equation with the series numerically
            ts = np.linspace(-1e-2, 1e-2, 5)
            for t in ts:
                vec = np.array([np.polyval(g[::-1], t) for g in gamma])
                val = ternary.eval_form(c.working_equation, 3, vec)
                assert abs(val) < 1e-9 * max(1.0, np.linalg.norm(vec) ** 3)


def test_quform_normalization_and_json():
    q = forms.QForm.normalized(np.array([0.0, -2.0, 0.0, 0.0, 0.0, 1.0]), 2)
    assert abs(np.linalg.norm(q.coeffs) - 1.0) < 1e-14
    assert q.coeffs[1] > 0  # leading significant coefficient flipped positive
    back = forms.QForm.from_json(q.to_json())
    assert np.allclose(back.coeffs, q.coeffs)
    with pytest.raises(ValueError):
        forms.QForm.from_json({"degree": 2, "coeffs": [1.0, 2.0]})


def test_extreme_quadric_double_vanishing():
    rng = np.random.default_rng(1)
    atoms = class_atoms(DISC, 1, rng)
    eq = forms.extreme_quadric(DISC, atoms, 1)
    for p in atoms:
        assert abs(eq.form(p.working)) < 1e-9
        # the quadric gradient is orthogonal to the curve tangent direction,
        # so the restriction vanishes to second order
        gq = ternary.eval_gradient(eq.form.coeffs, 2, p.working)
        gc = ternary.eval_gradient(DISC.working_equation, 3, p.working)
        tangent = np.cross(gc, p.working)
        denom = np.linalg.norm(gq) * np.linalg.norm(tangent) + 1e-30
        assert abs(np.dot(gq, tangent)) / denom < 1e-8


def test_extreme_quadric_sign_dichotomy_small():
    rng = np.random.default_rng(2)
    # disconnected: O and T1 classes nonnegative, T2 and T3 sign-changing
    for idx, nonneg in ((0, True), (1, True), (2, False), (3, False)):
        atoms = class_atoms(DISC, idx, rng)
        eq = forms.extreme_quadric(DISC, atoms, 1)
        assert eq.nonnegative == nonneg
        samples = cv.sample_real_locus(DISC, 200, seed=5)
        vals = np.array([float(eq.form(p.working)) for p in samples])
        if nonneg:
            assert vals.min() > -1e-9
        else:
            assert vals.min() < -1e-6 and vals.max() > 1e-6


def test_extreme_quadric_errors():
    rng = np.random.default_rng(3)
    atoms = class_atoms(DISC, 1, rng)
    with pytest.raises(RankAmbiguous):
        forms.extreme_quadric(DISC, [atoms[0]] * 2 + [atoms[1]], 1)
    # generic atoms: divisor sum is not 2-torsion, no quadric exists
    pts = cv.sample_real_locus(DISC, 3, affine_only=True, seed=11)
    with pytest.raises(NoQuadric):
        forms.extreme_quadric(DISC, pts, 1)


def test_nonnegativity_check_reports_witness():
    rng = np.random.default_rng(4)
    eq_bad = forms.extreme_quadric(DISC, class_atoms(DISC, 2, rng), 1)
    rep = forms.nonnegativity_check(DISC, eq_bad.form)
    assert not rep.nonneg
    assert rep.witness is not None
    wit = rep.witness.working if hasattr(rep.witness, "working") else rep.witness
    assert float(eq_bad.form(np.asarray(wit))) < 0
    eq_good = forms.extreme_quadric(DISC, class_atoms(DISC, 1, rng), 1)
    rep2 = forms.nonnegativity_check(DISC, eq_good.form)
    assert rep2.nonneg and rep2.witness is None
    assert rep2.real_zero_divisor.degree > 0


def test_artin_certificate_identity_holds():
    rng = np.random.default_rng(5)
    for c in (DISC, CONN):
        atoms = class_atoms(c, 1, rng)
        cert = forms.artin_certificate(c, atoms)
        assert cert.residual <= 1e-7
        # independent check at fresh curve samples:
        #   q * (l_vert^2 * l_T1^2 * den2)  ==  alpha * (l_12^2 * l_s3^2 * num4)
        samples = cv.sample_real_locus(c, 50, seed=99)
        l12 = cert.lines["l_A1A2"]
        ls3 = cert.lines["l_A12_A3"]
        lv = cert.lines["l_minusA12_A12"]
        lt1 = cert.lines["l_T1"]
        num4 = cert.quadrics["numerator_quartic"]
        den2 = cert.quadrics["denominator_quadric"]
        scale = 0.0
        worst = 0.0
        den_min = np.inf
        for p in samples:
            w = np.asarray(p.working, float)
            w = w / np.linalg.norm(w)
            den = float(lv(w)) ** 2 * float(lt1(w)) ** 2 * float(den2(w))
            num = float(l12(w)) ** 2 * float(ls3(w)) ** 2 * float(num4(w))
            lhs = float(cert.q(w)) * den
            rhs = cert.alpha * num
            worst = max(worst, abs(lhs - rhs))
            scale = max(scale, abs(lhs), abs(rhs))
            den_min = min(den_min, den)
        assert worst <= 1e-7 * max(1.0, scale)
        # the denominator is a product of squares and a positive quadric
        assert den_min > -1e-12


def test_artin_certificate_requires_t1_class():
    rng = np.random.default_rng(6)
    atoms = class_atoms(DISC, 2, rng)  # T2 class: not certifiable this way
    with pytest.raises(VerificationFailed):
        forms.artin_certificate(DISC, atoms)


def test_separating_quadric_signs():
    # vanishes at the prescribed oval pair, nonnegative on the oval,
    # strictly negative on the unbounded component
    rng = np.random.default_rng(7)
    pair = [
        cv.component_point(DISC, "Oval", t)
        for t in rng.uniform(0.2, 2.8, size=2)
    ]
    q = forms.separating_quadric(DISC, pair)
    for p in pair:
        w = np.asarray(p.working, float)
        w /= np.linalg.norm(w)
        assert abs(float(q(w))) < 1e-9
    oval = cv.sample_real_locus(DISC, 100, component="Oval", seed=3)
    assert min(float(q(p.working)) for p in oval) > -1e-9
    unb = cv.sample_real_locus(DISC, 100, component="Unbounded", seed=4)
    vals = [float(q(np.asarray(p.working, float) / np.linalg.norm(p.working)))
            for p in unb if not p.at_infinity]
    assert max(vals) < 0.0


def test_separating_quadric_rejects_offoval_pair():
    p = cv.point_from_affine(DISC, 2.0, float(np.sqrt(DISC.p_eval(2.0))))
    with pytest.raises(ValueError):
        forms.separating_quadric(DISC, [p, p])
