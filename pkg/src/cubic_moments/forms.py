"""Forms on the cubic: interpolation, extreme rays, certificates.

Double-vanishing conditions are imposed through jets: at each support point
the curve is parametrized locally as ``gamma(t) = p + t*u + s(t)*w`` with
``{p, u, w}`` orthonormal (``u`` tangent, ``w`` the unit gradient) and ``s``
solved order by order from the curve equation.  A form vanishes to order
``2m`` at the point iff the first ``2m`` Taylor coefficients of its pullback
along ``gamma`` vanish.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import curve as curve_mod
from . import divisors as div_mod
from . import ternary
from .errors import (
    AtomCollision,
    DegenerateLine,
    EmptyComponent,
    JetFailure,
    NoQuadric,
    NotTotallyReal,
    RankAmbiguous,
    VerificationFailed,
)

log = logging.getLogger(__name__)

RANK_TOL = 1e-7  # relative singular-value threshold for kernel extraction


@dataclass
class QForm:
    """Homogeneous ternary form of even degree in working coordinates."""

    degree: int
    coeffs: np.ndarray

    @staticmethod
    def normalized(coeffs, degree: int, fix_sign: bool = True) -> "QForm":
        coeffs = np.asarray(coeffs, dtype=float)
        nrm = np.linalg.norm(coeffs)
        if nrm == 0:
            raise ValueError("zero coefficient vector")
        coeffs = coeffs / nrm
        if fix_sign:
            for v in coeffs:
                if abs(v) > 1e-12:
                    if v < 0:
                        coeffs = -coeffs
                    break
        return QForm(degree=degree, coeffs=coeffs)

    def __call__(self, points):
        return ternary.eval_form(self.coeffs, self.degree, points)

    def to_json(self) -> dict:
        return {"degree": int(self.degree), "coeffs": [float(v) for v in self.coeffs]}

    @staticmethod
    def from_json(doc: dict) -> "QForm":
        coeffs = np.asarray(doc["coeffs"], dtype=float)
        if len(coeffs) != ternary.n_coeffs(int(doc["degree"])):
            raise ValueError("coefficient count does not match the degree")
        return QForm(degree=int(doc["degree"]), coeffs=coeffs)


@dataclass
class ExtremeQuadric:
    form: QForm
    nonnegative: bool
    torsion_class: str


@dataclass
class Certificate:
    """Weighted-square identity q * den = alpha * num on the curve."""

    atoms: list
    lines: dict  # named degree-1 forms, working coordinates
    quadrics: dict  # the quartic numerator factor and quadratic denominator factor
    alpha: float
    residual: float
    q: QForm

    def to_json(self) -> dict:
        return {
            "atoms": [[e.wx, e.wy] if not e.at_infinity else "O" for e in self.atoms],
            "lines": {k: [float(v) for v in f.coeffs] for k, f in self.lines.items()},
            "quadrics": {k: f.to_json() for k, f in self.quadrics.items()},
            "alpha": float(self.alpha),
            "residual": float(self.residual),
            "q": self.q.to_json(),
        }


@dataclass
class NonnegReport:
    nonneg: bool
    real_zero_divisor: div_mod.Divisor
    witness: object  # CurvePoint or projective triple; None when nonneg
    min_sampled_value: float


# --------------------------------------------------------------------------
# local parametrization and jet conditions
# --------------------------------------------------------------------------


def _trunc_mul(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    return np.convolve(a, b)[: order + 1]


def local_series(form_coeffs, degree: int, point, order: int) -> np.ndarray:
    """Truncated curve parametrization at a smooth point.

    Returns ``gamma`` of shape ``(3, order+1)``; column ``j`` holds the
    ``t^j`` coefficients.  ``gamma(0)`` is the unit representative of the
    point, ``gamma'(0)`` the unit tangent.
    """
    p = ternary.normalize_point(np.asarray(point, dtype=float))
    grad = ternary.eval_gradient(form_coeffs, degree, p)
    gnorm = np.linalg.norm(grad)
    if gnorm <= 1e-8 * np.linalg.norm(form_coeffs):
        raise JetFailure("vanishing gradient: the point is singular at tolerance")
    w = grad / gnorm
    u = np.cross(w, p)
    u /= np.linalg.norm(u)
    gamma = np.zeros((3, order + 1))
    gamma[:, 0] = p
    if order >= 1:
        gamma[:, 1] = u
    s = np.zeros(order + 1)
    for j in range(2, order + 1):
        cur = gamma + np.outer(w, s)
        val = _eval_form_series(form_coeffs, degree, cur, j)
        s[j] = -val[j] / gnorm
    return gamma + np.outer(w, s)


def _eval_form_series(coeffs, degree, gamma, order):
    """Taylor coefficients (up to ``order``) of the form along gamma."""
    total = np.zeros(order + 1)
    cache = {(0, 0, 0): np.array([1.0])}

    def mono_series(e):
        if e in cache:
            return cache[e]
        for t in range(3):
            if e[t] > 0:
                prev = list(e)
                prev[t] -= 1
                out = _trunc_mul(mono_series(tuple(prev)), gamma[t, : order + 1], order)
                cache[e] = out
                return out
        raise AssertionError

    for i, e in enumerate(ternary.exponents(degree)):
        if coeffs[i] != 0:
            ser = mono_series(e)
            total[: ser.size] += coeffs[i] * ser
    return total


def double_vanishing_system(form_coeffs, degree: int, points_with_mults, twod: int) -> np.ndarray:
    """Constraint matrix whose kernel is the doubly-vanishing space.

    One row per jet order ``0 .. 2*mult - 1`` per point; columns are the
    degree-``twod`` monomial coefficients.
    """
    rows = []
    for point, mult in points_with_mults:
        order = 2 * int(mult)
        gamma = local_series(form_coeffs, degree, point, order)
        cache = {(0, 0, 0): np.array([1.0])}

        def mono_series(e):
            if e in cache:
                return cache[e]
            for t in range(3):
                if e[t] > 0:
                    prev = list(e)
                    prev[t] -= 1
                    out = _trunc_mul(mono_series(tuple(prev)), gamma[t], order)
                    cache[e] = out
                    return out
            raise AssertionError

        block = np.zeros((order, ternary.n_coeffs(twod)))
        for col, e in enumerate(ternary.exponents(twod)):
            ser = mono_series(e)
            block[: min(order, ser.size), col] = ser[:order]
        rows.append(block)
    return np.vstack(rows)


def _kernel(matrix: np.ndarray, ncols: int) -> np.ndarray:
    """Orthonormal kernel basis (rows) of a condition matrix."""
    if matrix.size == 0:
        return np.eye(ncols)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    scaled = matrix / np.where(norms > 0, norms, 1.0)  # row equilibration
    _, sing, vh = np.linalg.svd(scaled)
    smax = sing[0] if sing.size else 0.0
    rank = int(np.sum(sing > RANK_TOL * smax)) if smax > 0 else 0
    return vh[rank:]


def interpolate_double_vanishing(c, divisor, twod: int) -> list:
    """Basis of degree-``twod`` forms on the cubic vanishing doubly on D.

    Multiples of the curve equation satisfy every jet condition, so for
    ``twod >= 4`` the raw kernel is reduced modulo ``h * R_(twod-3)``; the
    returned (orthonormal) basis spans a complement, and its length is the
    dimension of the space of forms on the curve.
    """
    if twod % 2 != 0 or twod < 2:
        raise ValueError("twod must be an even degree >= 2")
    entries = div_mod._lift_entries(c, divisor) if isinstance(divisor, div_mod.Divisor) else divisor
    pts = []
    for pt, mult in entries:
        if not isinstance(pt, curve_mod.CurvePoint):
            raise NotTotallyReal("support must consist of real curve points")
        pts.append((pt.working, int(mult)))
    if 2 * sum(m for _, m in pts) > 3 * twod:
        raise ValueError("2 deg D exceeds the Bezout bound 3 * twod")
    cond = double_vanishing_system(c.working_equation, 3, pts, twod)
    kern = _kernel(cond, ternary.n_coeffs(twod))
    if twod >= 4:
        hmul = np.array(
            [
                ternary.form_product(c.working_equation, 3, _unit_monomial(twod - 3, j), twod - 3)
                for j in range(ternary.n_coeffs(twod - 3))
            ]
        )
        hq, _ = np.linalg.qr(hmul.T)
        proj = kern - (kern @ hq) @ hq.T
        _, sing, vh = np.linalg.svd(proj) if proj.size else (None, np.array([]), None)
        smax = sing[0] if sing.size else 0.0
        if smax < 1e-9:
            return []
        dim = int(np.sum(sing > RANK_TOL * smax))
        kern = vh[:dim]
    return [QForm.normalized(row, twod) for row in kern]


def _unit_monomial(degree, j):
    out = np.zeros(ternary.n_coeffs(degree))
    out[j] = 1.0
    return out


# --------------------------------------------------------------------------
# extreme quadrics and nonnegativity
# --------------------------------------------------------------------------


def extreme_quadric(c, atoms: list, d: int = 1) -> ExtremeQuadric:
    """The quadric (degree-2d form) vanishing doubly at 3d prescribed atoms."""
    if d not in (1, 2):
        raise ValueError("d in {1, 2} supported")
    if len(atoms) != 3 * d:
        raise ValueError(f"expected {3 * d} atoms")
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            if curve_mod.points_equal(atoms[i], atoms[j]):
                raise RankAmbiguous("atoms must be pairwise distinct")
    basis = interpolate_double_vanishing(c, [(a, 1) for a in atoms], 2 * d)
    if len(basis) == 0:
        raise NoQuadric("no doubly-vanishing form: the divisor sum is not 2-torsion")
    if len(basis) >= 2:
        raise RankAmbiguous("kernel dimension >= 2: degenerate atom configuration")
    s = curve_mod.divisor_sum(c, [(a, 1) for a in atoms])
    cls = div_mod._torsion_class(c, s)
    if cls == "NonTorsion":
        raise RankAmbiguous("1-dimensional kernel but non-torsion sum: inconsistent data")
    q = basis[0]
    # sign convention: nonnegative on the component of atoms[0].  All real
    # zeros are double, so the sign is constant there; anchor at the sample
    # of largest magnitude to stay clear of the zeros themselves.
    label, _ = curve_mod.component_param(c, atoms[0])
    comp = curve_mod.sample_real_locus(c, 64, component=label, seed=13)
    vals = np.array([float(q(p.working)) for p in comp])
    anchor = vals[int(np.argmax(np.abs(vals)))]
    coeffs = -q.coeffs if anchor < 0 else q.coeffs
    form = QForm(degree=2 * d, coeffs=coeffs)
    return ExtremeQuadric(form=form, nonnegative=cls in ("O", "T1"), torsion_class=cls)


def _cubic_samples(c, n: int, seed: int = 11) -> list:
    return curve_mod.sample_real_locus(c, n, seed=seed)


def _general_curve_samples(coeffs, degree, n, seed=11):
    """Real points of a general plane curve via random line sections."""
    rng = np.random.default_rng(seed)
    out = []
    tries = 0
    while len(out) < n and tries < 50 * n:
        tries += 1
        p, q = rng.standard_normal(3), rng.standard_normal(3)
        b = ternary.restrict_to_line(coeffs, degree, p, q)
        roots = np.roots(b[::-1]) if np.max(np.abs(b)) > 1e-12 else []
        for z in np.atleast_1d(roots):
            if abs(z.imag) < 1e-9 * (1.0 + abs(z)):
                pt = p + z.real * q
                nrm = np.linalg.norm(pt)
                if nrm > 1e-9:
                    out.append(pt / nrm)
    return out


def nonnegativity_check(curve_eq, q: QForm) -> NonnegReport:
    """Even-multiplicity real zeros plus dense sign sampling."""
    divisor = div_mod.intersection_divisor(curve_eq, q)
    rz = div_mod.real_part(divisor)
    even = all(e.mult % 2 == 0 for e in rz.entries)
    is_cubic = isinstance(curve_eq, curve_mod.PlaneCubic)
    if is_cubic:
        samples = [p.working for p in _cubic_samples(curve_eq, 512)]
        samples += _arc_midpoints(curve_eq, rz)
        sample_pts = samples
    else:
        coeffs, degree = div_mod._coerce_form(curve_eq)
        sample_pts = _general_curve_samples(coeffs, degree, 512)
    vals = np.array([float(q(np.asarray(p, dtype=float))) for p in sample_pts])
    min_val = float(np.min(vals))
    nonneg = bool(even and min_val >= -1e-10 and np.max(vals) > 0)
    witness = None
    if not nonneg and min_val < -1e-10:
        wpt = sample_pts[int(np.argmin(vals))]
        witness = (
            curve_mod.point_from_working(curve_eq, wpt, validate=False) if is_cubic else wpt
        )
    return NonnegReport(
        nonneg=nonneg, real_zero_divisor=rz, witness=witness, min_sampled_value=min_val
    )


def _arc_midpoints(c, real_zeros: div_mod.Divisor) -> list:
    """Sample points between consecutive zeros along each real component."""
    by_label: dict = {label: [] for label in curve_mod.topology(c).components}
    for e in real_zeros.entries:
        pt = e.point
        if not isinstance(pt, curve_mod.CurvePoint):
            pt = curve_mod.point_from_working(c, np.real(e.triple()), validate=False)
        label, param = curve_mod.component_param(c, pt)
        by_label[label].append(param)
    out = []
    for label, params in by_label.items():
        params = sorted(params)
        if label == "Oval":
            if not params:
                continue
            ext = params + [params[0] + 2 * np.pi]
            mids = [(ext[i] + ext[i + 1]) / 2 for i in range(len(params))]
        else:
            ext = [-curve_mod.UNBOUNDED_T_MAX] + params + [curve_mod.UNBOUNDED_T_MAX]
            mids = [(ext[i] + ext[i + 1]) / 2 for i in range(len(ext) - 1)]
        out.extend(curve_mod.component_point(c, label, m).working for m in mids)
    return out


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------


def _weier_triple(p: curve_mod.CurvePoint) -> np.ndarray:
    if p.at_infinity:
        return np.array([0.0, 0.0, 1.0])
    return np.array([1.0, p.wx, p.wy])


def _line_through(c, p, q) -> np.ndarray:
    """Weierstrass-coordinate line through two curve points (tangent if equal)."""
    if curve_mod.points_equal(p, q):
        h = curve_mod.weierstrass_coeffs(c.w)
        ell = ternary.eval_gradient(h, 3, _weier_triple(p))
    else:
        ell = np.cross(_weier_triple(p), _weier_triple(q))
    nrm = np.linalg.norm(ell)
    if nrm < 1e-12:
        raise DegenerateLine("line construction collapsed")
    return ell / nrm


def artin_certificate(c, atoms: list) -> Certificate:
    """Weighted-square certificate for a class-T1 extreme quadric.

    With A3' = A1 + A2 the identity reads

        q * (l_{-A3',A3'}^2 * l_T1^2 * (l_T1^2 + k2*l_O^2))
          = alpha * (l_{A1,A2}^2 * l_{A3',A3}^2 * (z2^2*l_O^2 + k1*l_O^2*l_T1^2))

    on the curve, with k1 = a2+a3-2a1 and k2 = (a2-a1)(a3-a1) > 0.  Every
    denominator factor is a square or a positive combination of squares on
    the real locus, which certifies nonnegativity of q.
    """
    if len(atoms) != 3:
        raise ValueError("exactly 3 atoms required")
    s = curve_mod.divisor_sum(c, [(a, 1) for a in atoms])
    ts = curve_mod.two_torsion(c)
    if not curve_mod.points_equal(s, ts.all_real[1], tol=1e-6):
        raise VerificationFailed(
            "certificate applies to torsion class T1 only; class-O rays are squares"
        )
    a1 = c.w.a1
    if c.w.pair_is_real:
        k1 = c.w.pair[0] + c.w.pair[1] - 2 * a1
        k2 = (c.w.pair[0] - a1) * (c.w.pair[1] - a1)
    else:
        re, im = c.w.pair
        k1 = 2 * re - 2 * a1
        k2 = (re - a1) ** 2 + im**2
    if k2 <= 0:
        raise VerificationFailed("denominator coefficient (a2-a1)(a3-a1) not positive")

    p1, p2, p3 = atoms
    s12 = curve_mod.add(c, p1, p2)
    # a near miss is as fatal as an exact hit: constructing A3 through an
    # intermediate close to O loses the digits the 1e-7 verification needs
    if curve_mod.points_equal(s12, curve_mod.point_at_infinity(c), tol=1e-2):
        raise DegenerateLine("A1 + A2 too close to O: construction is ill-conditioned")
    if curve_mod.points_equal(s12, ts.all_real[1], tol=1e-2):
        raise DegenerateLine("A1 + A2 too close to T1: construction is ill-conditioned")
    q = extreme_quadric(c, atoms, d=1).form

    l_12 = _line_through(c, p1, p2)
    l_s3 = _line_through(c, s12, p3)
    l_vert = _line_through(c, curve_mod.neg(c, s12), s12)
    # canonical representatives: rescaling them inside the sums below would
    # shift the complex zeros shared by the quartic and quadratic factors
    l_t1 = np.array([-a1, 1.0, 0.0])
    l_o = np.array([1.0, 0.0, 0.0])

    def sq(v):
        return ternary.form_product(v, 1, v, 1)

    z2sq = np.zeros(6)
    z2sq[ternary.index_map(2)[(0, 0, 2)]] = 1.0
    quart = ternary.form_product(z2sq, 2, sq(l_o), 2) + k1 * ternary.form_product(
        sq(l_o), 2, sq(l_t1), 2
    )
    quad = sq(l_t1) + k2 * sq(l_o)
    num = ternary.form_product(
        ternary.form_product(sq(l_12), 2, sq(l_s3), 2), 4, quart, 4
    )
    den = ternary.form_product(ternary.form_product(sq(l_vert), 2, sq(l_t1), 2), 4, quad, 2)

    qz = ternary.form_compose_linear(q.coeffs, 2, c.transform)  # q in Weierstrass coords
    samples = [_weier_triple(p) for p in curve_mod.sample_real_locus(c, 64, seed=23)]
    samples = [sm / np.linalg.norm(sm) for sm in samples]
    den_vals = np.array([ternary.eval_form(den, 6, sm) for sm in samples])
    num_vals = np.array([ternary.eval_form(num, 8, sm) for sm in samples])
    q_vals = np.array([ternary.eval_form(qz, 2, sm) for sm in samples])
    dscale, nscale = np.max(np.abs(den_vals)), np.max(np.abs(num_vals))
    ok = (np.abs(den_vals) > 1e-6 * dscale) & (np.abs(num_vals) > 1e-6 * nscale)
    if not np.any(ok):
        raise DegenerateLine("all evaluation samples hit zeros of the identity")
    alpha = float(np.median(q_vals[ok] * den_vals[ok] / num_vals[ok]))
    if alpha <= 0:
        raise VerificationFailed("certificate scale alpha is not positive")

    fresh = [_weier_triple(p) for p in curve_mod.sample_real_locus(c, 200, seed=101)]
    fresh = [sm / np.linalg.norm(sm) for sm in fresh]
    lhs = np.array([ternary.eval_form(qz, 2, sm) * ternary.eval_form(den, 6, sm) for sm in fresh])
    rhs = alpha * np.array([ternary.eval_form(num, 8, sm) for sm in fresh])
    scale = np.max(np.abs(lhs))
    residual = float(np.max(np.abs(lhs - rhs)) / max(scale, 1e-30))
    if residual > 1e-7:
        raise VerificationFailed(f"certificate residual {residual:.3e} exceeds 1e-7")

    def to_working(coeffs, degree):
        work = ternary.form_compose_linear(coeffs, degree, c.inv_transform)
        return QForm.normalized(work, degree, fix_sign=False), float(np.linalg.norm(work))

    w12, n12 = to_working(l_12, 1)
    ws3, ns3 = to_working(l_s3, 1)
    wvert, nvert = to_working(l_vert, 1)
    wt1, nt1 = to_working(l_t1, 1)
    wquart, nquart = to_working(quart, 4)
    wquad, nquad = to_working(quad, 2)
    lines = {
        "l_A1A2": w12,
        "l_A12_A3": ws3,
        "l_minusA12_A12": wvert,
        "l_T1": wt1,
        "l_O": to_working(l_o, 1)[0],
    }
    quadrics = {
        "numerator_quartic": wquart,
        "denominator_quadric": wquad,
    }
    # the stored pieces are unit-norm copies, so the scale they shed moves
    # into the reported constant; the identity then holds for the fields as-is
    alpha_out = alpha * (n12**2 * ns3**2 * nquart) / (nvert**2 * nt1**2 * nquad)
    return Certificate(
        atoms=list(atoms), lines=lines, quadrics=quadrics, alpha=alpha_out,
        residual=residual, q=q,
    )


def separating_quadric(c, b_pair: list) -> QForm:
    """A form nonnegative on the oval, vanishing doubly at B, negative beyond.

    Sum of the two indefinite extreme quadrics through B with auxiliary atoms
    T2 - B1 - B2 and T3 - B1 - B2; both change sign off the oval.
    """
    topo = curve_mod.topology(c)
    if topo.kind != "TwoComponents":
        raise EmptyComponent("separating quadric needs an oval component")
    if len(b_pair) != 2:
        raise ValueError("exactly 2 base points required")
    b1, b2 = b_pair
    for b in (b1, b2):
        label, _ = curve_mod.component_param(c, b)
        if label != "Oval":
            raise ValueError("base points must lie on the oval")
    if curve_mod.points_equal(b1, b2):
        raise AtomCollision("base points coincide")
    ts = curve_mod.two_torsion(c)
    forms = []
    for t in ts.all_real[2:]:
        aux = curve_mod.add(c, t, curve_mod.neg(c, curve_mod.add(c, b1, b2)))
        if curve_mod.points_equal(aux, b1) or curve_mod.points_equal(aux, b2):
            raise AtomCollision("auxiliary atom collides with a base point")
        forms.append(extreme_quadric(c, [b1, b2, aux], 1).form)
    total = forms[0].coeffs + forms[1].coeffs
    out = QForm.normalized(total, 2, fix_sign=False)
    oval = [p.working for p in curve_mod.sample_real_locus(c, 256, component="Oval", seed=7)]
    unb = [p.working for p in curve_mod.sample_real_locus(c, 256, component="Unbounded", seed=7)]
    min_oval = float(np.min([out(p) for p in oval]))
    max_unb = float(np.max([out(p) for p in unb]))
    if min_oval < -1e-9 or max_unb >= 0:
        raise VerificationFailed(
            f"separation failed: min oval {min_oval:.2e}, max unbounded {max_unb:.2e}"
        )
    log.debug("separating quadric margin delta=%.6g", -max_unb)
    return out
