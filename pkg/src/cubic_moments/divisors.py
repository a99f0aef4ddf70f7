"""Effective divisors on plane curves and the face-divisor predicate.

The central computation is ``intersection_divisor``: the zero divisor of a
form ``q`` on a plane curve ``F = 0``, obtained by eliminating one variable
with a resultant in generic (randomly rotated) coordinates and clustering the
roots of the eliminant.  Multiplicities are cluster sizes; a post-check
verifies Bezout's total and on-curve residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import curve as curve_mod
from . import ternary
from .errors import (
    CommonComponent,
    IllConditioned,
    NotTotallyReal,
    OutOfRange,
)

CLUSTER_RADIUS = 2e-5  # chordal radius for multiplicity clustering (see notes)


@dataclass
class DivisorEntry:
    point: object  # CurvePoint or a normalized projective triple (possibly complex)
    mult: int
    real: bool

    def triple(self) -> np.ndarray:
        if isinstance(self.point, curve_mod.CurvePoint):
            return self.point.working
        return np.asarray(self.point)


@dataclass
class Divisor:
    entries: list = field(default_factory=list)

    @property
    def degree(self) -> int:
        return sum(e.mult for e in self.entries)

    @property
    def totally_real(self) -> bool:
        return all(e.real for e in self.entries)

    def to_json(self) -> dict:
        entries = []
        for e in self.entries:
            t = e.triple()
            if e.real:
                pt = [float(np.real(v)) for v in t]
            else:
                pt = [[float(np.real(v)), float(np.imag(v))] for v in t]
            entries.append({"point": pt, "mult": int(e.mult), "real": bool(e.real)})
        return {"entries": entries}

    @staticmethod
    def from_json(doc: dict, c=None) -> "Divisor":
        entries = []
        for rec in doc["entries"]:
            coords = [
                complex(v[0], v[1]) if isinstance(v, (list, tuple)) else float(v)
                for v in rec["point"]
            ]
            vec = np.array(coords)
            real = bool(rec.get("real", not np.iscomplexobj(vec)))
            if real:
                vec = np.real(vec).astype(float)
            point = ternary.normalize_point(vec)
            if real and c is not None:
                point = curve_mod.point_from_working(c, point)
            entries.append(DivisorEntry(point=point, mult=int(rec["mult"]), real=real))
        return Divisor(entries=entries)


@dataclass(frozen=True)
class FaceReport:
    is_face_divisor: bool
    face_dim: int
    degree: int
    torsion_class: str  # NotApplicable | O | T1 | T2 | T3 | NonTorsion
    quadric_exists: bool
    is_square: bool


def _coerce_form(obj) -> tuple[np.ndarray, int]:
    if isinstance(obj, curve_mod.PlaneCubic):
        return obj.working_equation, 3
    if hasattr(obj, "coeffs") and hasattr(obj, "degree"):
        return np.asarray(obj.coeffs), int(obj.degree)
    coeffs, degree = obj
    return np.asarray(coeffs), int(degree)


def _sylvester(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sylvester matrix of two univariate coefficient vectors (low-to-high)."""
    m, k = len(a) - 1, len(b) - 1
    s = np.zeros((m + k, m + k), dtype=a.dtype)
    for i in range(k):
        s[i, i : i + m + 1] = a[::-1]
    for i in range(m):
        s[k + i, i : i + k + 1] = b[::-1]
    return s


def _poly_in_w2(coeffs: np.ndarray, degree: int, w0: float, w1: float) -> np.ndarray:
    """Coefficients (low-to-high in w2) of the form restricted to fixed (w0, w1)."""
    out = np.zeros(degree + 1)
    for i, (e0, e1, e2) in enumerate(ternary.exponents(degree)):
        if coeffs[i] != 0:
            out[e2] += coeffs[i] * (w0**e0) * (w1**e1)
    return out


def _binary_form_coeffs(vals, thetas, n):
    """Fit R(w0,w1) = sum r_i w0^(n-i) w1^i from circle samples."""
    a = np.stack(
        [np.cos(thetas) ** (n - i) * np.sin(thetas) ** i for i in range(n + 1)],
        axis=1,
    )
    r, *_ = np.linalg.lstsq(a, vals, rcond=None)
    return r


def _common_root(pa, pb, tol=1e-4):
    """Shared root of two univariate polynomials (low-to-high coefficients)."""
    ra = np.roots(pa[::-1]) if len(pa) > 1 else np.array([])
    rb = np.roots(pb[::-1]) if len(pb) > 1 else np.array([])
    if ra.size == 0 or rb.size == 0:
        return None
    best = []
    for z in ra:
        d = np.min(np.abs(rb - z)) / np.sqrt(1.0 + abs(z) ** 2)
        if d <= tol:
            best.append(z)
    if not best:
        return None
    # distinct candidates above the same projection mean a non-generic rotation
    best = sorted(best, key=lambda z: (z.real, z.imag))
    merged = [best[0]]
    for z in best[1:]:
        if abs(z - merged[-1]) > 1e-3 * (1.0 + abs(z)):
            merged.append(z)
    if len(merged) > 1:
        return "ambiguous"
    return merged[0]


def intersection_divisor(curve_eq, q, seed: int = 0) -> Divisor:
    """Zero divisor of ``q`` on the plane curve, with multiplicities.

    Total degree is ``deg(curve) * deg(q)``; complex points come in conjugate
    pairs tagged ``real=False``.
    """
    f, m = _coerce_form(curve_eq)
    g, k = _coerce_form(q)
    f = np.asarray(f, dtype=float) / np.linalg.norm(f)
    g = np.asarray(g, dtype=float) / np.linalg.norm(g)
    n = m * k
    rng = np.random.default_rng(seed)
    last_err = None
    for _ in range(12):
        rot = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        fp = ternary.form_compose_linear(f, m, rot)
        gp = ternary.form_compose_linear(g, k, rot)
        # leading w2-coefficients must stay away from zero in the new frame
        lead_f = fp[ternary.index_map(m)[(0, 0, m)]]
        lead_g = gp[ternary.index_map(k)[(0, 0, k)]]
        if abs(lead_f) < 1e-3 or abs(lead_g) < 1e-3:
            continue
        thetas = np.pi * (np.arange(2 * n + 5) + 0.31) / (2 * n + 5)
        vals = np.array(
            [
                np.linalg.det(
                    _sylvester(
                        _poly_in_w2(fp, m, np.cos(t), np.sin(t)),
                        _poly_in_w2(gp, k, np.cos(t), np.sin(t)),
                    )
                )
                for t in thetas
            ]
        )
        if np.max(np.abs(vals)) <= 1e-10:
            raise CommonComponent("elimination polynomial vanishes identically")
        r = _binary_form_coeffs(vals, thetas, n)
        scale = np.max(np.abs(r))
        deg_eff = 0
        for j in range(n, -1, -1):
            if abs(r[j]) > 1e-9 * scale:
                deg_eff = j
                break
        roots = list(np.roots(r[: deg_eff + 1][::-1])) if deg_eff > 0 else []
        clusters = curve_mod._cluster_chordal(
            roots, extra_at_infinity=n - deg_eff, radius=CLUSTER_RADIUS
        )
        try:
            points = _locate_points(fp, m, gp, k, clusters, rot)
        except _RetryRotation as exc:
            last_err = exc
            continue
        if sum(mult for _, mult in points) != n:
            last_err = _RetryRotation("Bezout total mismatch")
            continue
        return _assemble_divisor(points, curve_eq)
    raise IllConditioned(f"could not assign multiplicities: {last_err}")


class _RetryRotation(Exception):
    pass


def _locate_points(fp, m, gp, k, clusters, rot):
    points = []
    for center, mult, at_inf in clusters:
        if at_inf:
            w0, w1 = 0.0, 1.0
        else:
            nrm = np.sqrt(1.0 + abs(center) ** 2)
            w0, w1 = 1.0 / nrm, center / nrm
        pa = _poly_in_w2_complex(fp, m, w0, w1)
        pb = _poly_in_w2_complex(gp, k, w0, w1)
        z = _common_root(pa, pb)
        if z is None or isinstance(z, str):
            raise _RetryRotation(f"w2 recovery failed over a projection ({z})")
        pt = rot @ np.array([w0, w1, z])
        res_f = abs(ternary.eval_form(fp + 0j, m, np.array([w0, w1, z])))
        if res_f > 1e-5 * (1.0 + abs(z)) ** m:
            raise _RetryRotation("representative not on the curve")
        points.append((ternary.normalize_point(pt), mult))
    # guard: clusters must stay well separated from each other
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = min(
                np.linalg.norm(points[i][0] - points[j][0]),
                np.linalg.norm(points[i][0] + points[j][0]),
            )
            if d < 1e-3:
                raise _RetryRotation("clusters too close after lifting")
    return points


def _poly_in_w2_complex(coeffs, degree, w0, w1):
    out = np.zeros(degree + 1, dtype=complex)
    for i, (e0, e1, e2) in enumerate(ternary.exponents(degree)):
        if coeffs[i] != 0:
            out[e2] += coeffs[i] * (w0**e0) * (w1**e1)
    return out


def _assemble_divisor(points, curve_eq) -> Divisor:
    """Tag real/complex, pair conjugates, and lift points onto a cubic if given."""
    is_cubic = isinstance(curve_eq, curve_mod.PlaneCubic)
    entries = []
    complex_pool = []
    for pt, mult in points:
        if np.max(np.abs(np.imag(np.atleast_1d(pt)))) <= 1e-7:
            vec = np.real(pt).astype(float)
            if is_cubic:
                cp = curve_mod.point_from_working(curve_eq, vec, validate=False)
                entries.append(DivisorEntry(point=cp, mult=mult, real=True))
            else:
                entries.append(
                    DivisorEntry(point=ternary.normalize_point(vec), mult=mult, real=True)
                )
        else:
            complex_pool.append((pt, mult))
    used = [False] * len(complex_pool)
    for i, (pt, mult) in enumerate(complex_pool):
        if used[i]:
            continue
        partner = None
        target = ternary.normalize_point(np.conj(pt))
        for j in range(i + 1, len(complex_pool)):
            if used[j] or complex_pool[j][1] != mult:
                continue
            if np.linalg.norm(complex_pool[j][0] - target) < 1e-5:
                partner = j
                break
        if partner is None:
            raise IllConditioned("complex intersection points do not pair into conjugates")
        used[i] = used[partner] = True
        entries.append(DivisorEntry(point=pt, mult=mult, real=False))
        entries.append(DivisorEntry(point=complex_pool[partner][0], mult=mult, real=False))

    def sort_key(e):
        t = e.triple()
        return (not e.real, tuple(np.round(np.real(t), 9)), tuple(np.round(np.imag(t), 9)))

    entries.sort(key=sort_key)
    return Divisor(entries=entries)


def real_part(divisor: Divisor) -> Divisor:
    return Divisor(entries=[e for e in divisor.entries if e.real])


def face_dimension(kind: str, d: int, deg_d: int) -> int:
    """Closed-form dimension of the face cut out by a degree-``deg_d`` divisor."""
    if kind == "rational":
        if not 0 <= deg_d <= d:
            raise OutOfRange("rational case needs 0 <= deg D <= d")
        return 2 * (d - deg_d) + 1
    if kind == "cubic":
        if not 1 <= deg_d <= 3 * d - 1:
            raise OutOfRange("cubic case needs 1 <= deg D <= 3d - 1")
        return 2 * (3 * d - deg_d)
    raise OutOfRange(f"unknown curve kind {kind!r}")


def _lift_entries(c, divisor: Divisor) -> list:
    out = []
    for e in divisor.entries:
        if not e.real:
            raise NotTotallyReal("divisor has complex support points")
        pt = e.point
        if not isinstance(pt, curve_mod.CurvePoint):
            pt = curve_mod.point_from_working(c, np.real(e.triple()))
        out.append((pt, e.mult))
    return out


def _torsion_class(c, s) -> str:
    ts = curve_mod.two_torsion(c)
    names = ["O", "T1", "T2", "T3"]
    for name, t in zip(names, ts.all_real):
        if curve_mod.points_equal(s, t, tol=1e-6):
            return name
    return "NonTorsion"


def face_divisor_check(c, divisor: Divisor, d: int) -> FaceReport:
    """Decide whether D is a face divisor of the degree-2d nonnegative cone."""
    if d < 1:
        raise OutOfRange("d must be >= 1")
    entries = _lift_entries(c, divisor)
    deg = sum(mult for _, mult in entries)
    if deg == 0:
        raise OutOfRange("empty divisor")
    if deg <= 3 * d - 1:
        return FaceReport(
            is_face_divisor=True,
            face_dim=face_dimension("cubic", d, deg),
            degree=deg,
            torsion_class="NotApplicable",
            quadric_exists=True,
            is_square=False,
        )
    if deg > 3 * d:
        return FaceReport(
            is_face_divisor=False,
            face_dim=0,
            degree=deg,
            torsion_class="NotApplicable",
            quadric_exists=False,
            is_square=False,
        )
    s = curve_mod.divisor_sum(c, entries)
    cls = _torsion_class(c, s)
    if cls == "O":
        return FaceReport(True, 1, deg, cls, True, True)
    if cls == "T1":
        return FaceReport(True, 1, deg, cls, True, False)
    if cls in ("T2", "T3"):
        return FaceReport(False, 0, deg, cls, True, False)
    return FaceReport(False, 0, deg, "NonTorsion", False, False)
