"""Smooth real plane cubics in Weierstrass form and their group law.

A curve is stored by its branch data: one real root ``a1`` of the right-hand
side together with either two more real roots ``a1 < a2 < a3`` or a complex
conjugate pair.  The projective model is

    h(z0, z1, z2) = z0*z2^2 - (z1 - a1*z0)(z1 - a2*z0)(z1 - a3*z0),

with affine chart ``x = z1/z0``, ``y = z2/z0`` and the single point
``O = (0:0:1)`` at infinity (an inflection point; the line ``z0 = 0`` meets
the curve there with multiplicity three).

A ``PlaneCubic`` additionally carries an invertible "chart" transform ``M``;
working coordinates are ``w = M z``.  The group law always acts on the
Weierstrass data, so changing charts never changes sums of points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ternary
from .errors import (
    DegenerateLine,
    EmptyComponent,
    OffCurve,
    OrderViolation,
    RepeatedRoot,
    RetriesExhausted,
)

POINT_TOL = 1e-8  # point equality in normalized working coordinates
UNBOUNDED_T_MAX = 0.999  # cap of the rational substitution on unbounded arcs


@dataclass(frozen=True)
class WeierstrassData:
    """Branch points of ``y^2 = (x - a1)(x - a2)(x - a3)``.

    ``pair`` is ``(a2, a3)`` with ``a1 < a2 < a3`` in the two-component case
    and ``(re, im)`` with ``im > 0`` for a complex conjugate pair ``re +- i*im``.
    """

    a1: float
    pair: tuple[float, float]
    pair_is_real: bool

    @property
    def roots(self) -> np.ndarray:
        if self.pair_is_real:
            return np.array([self.a1, self.pair[0], self.pair[1]], dtype=complex)
        re, im = self.pair
        return np.array([self.a1, re + 1j * im, re - 1j * im])

    @property
    def monic_coeffs(self) -> tuple[float, float, float]:
        """``(A, B, C)`` with ``y^2 = x^3 + A x^2 + B x + C``."""
        r = self.roots
        a = -float(np.real(r[0] + r[1] + r[2]))
        b = float(np.real(r[0] * r[1] + r[0] * r[2] + r[1] * r[2]))
        c = -float(np.real(r[0] * r[1] * r[2]))
        return a, b, c


@dataclass(frozen=True)
class Topology:
    kind: str  # "TwoComponents" | "Connected"
    components: dict  # label -> (x_min, x_max); x_max = inf on unbounded arcs


@dataclass
class PlaneCubic:
    w: WeierstrassData
    transform: np.ndarray  # 3x3 invertible, working = transform @ weierstrass
    working_equation: np.ndarray = field(init=False)  # degree-3 coeffs, unit norm

    def __post_init__(self):
        self.transform = np.asarray(self.transform, dtype=float)
        if self.transform.shape != (3, 3):
            raise ValueError("transform must be 3x3")
        if abs(np.linalg.det(self.transform)) < 1e-12:
            raise ValueError("transform must be invertible")
        self._inv_transform = np.linalg.inv(self.transform)
        coeffs = ternary.form_compose_linear(
            weierstrass_coeffs(self.w), 3, self._inv_transform
        )
        self.working_equation = coeffs / np.linalg.norm(coeffs)
        self._aff_quotient = None  # lazily built by the moments module

    @property
    def identity_chart(self) -> bool:
        return bool(np.allclose(self.transform, np.eye(3), atol=1e-14))

    @property
    def inv_transform(self) -> np.ndarray:
        return self._inv_transform

    @property
    def monic_coeffs(self) -> tuple[float, float, float]:
        return self.w.monic_coeffs

    def p_eval(self, x):
        a, b, c = self.w.monic_coeffs
        return ((x + a) * x + b) * x + c

    def p_deriv(self, x):
        a, b, _ = self.w.monic_coeffs
        return (3.0 * x + 2.0 * a) * x + b


@dataclass(eq=False)
class CurvePoint:
    """A real point of the curve, kept in both coordinate systems."""

    at_infinity: bool
    wx: float
    wy: float
    working: np.ndarray  # normalized projective triple in working coordinates

    def __repr__(self):
        if self.at_infinity:
            return "CurvePoint(O)"
        return f"CurvePoint({self.wx:.6g}, {self.wy:.6g})"


@dataclass(frozen=True)
class TorsionSet:
    all_real: list  # real 2-torsion points, O first
    positive: list  # the subgroup relevant to nonnegative extreme rays


def weierstrass_coeffs(w: WeierstrassData) -> np.ndarray:
    """Degree-3 coefficient vector of ``h`` in graded-lex order."""
    a, b, c = w.monic_coeffs
    out = np.zeros(10)
    idx = ternary.index_map(3)
    out[idx[(1, 0, 2)]] = 1.0
    out[idx[(0, 3, 0)]] = -1.0
    out[idx[(1, 2, 0)]] = -a
    out[idx[(2, 1, 0)]] = -b
    out[idx[(3, 0, 0)]] = -c
    return out


def new_weierstrass(a1: float, pair, pair_is_real: bool, transform=None) -> PlaneCubic:
    """Build a smooth curve; rejects singular or misordered branch data."""
    a1 = float(a1)
    u, v = float(pair[0]), float(pair[1])
    if pair_is_real:
        if a1 == u or u == v or a1 == v:
            raise RepeatedRoot("real branch points must be pairwise distinct")
        if not (a1 < u < v):
            raise OrderViolation("real branch points must satisfy a1 < a2 < a3")
    else:
        if v == 0.0:
            raise RepeatedRoot("complex pair with zero imaginary part is a double root")
        v = abs(v)
    data = WeierstrassData(a1=a1, pair=(u, v), pair_is_real=pair_is_real)
    if transform is None:
        transform = np.eye(3)
    return PlaneCubic(w=data, transform=transform)


def affine_residual(c: PlaneCubic, x: float, y: float) -> float:
    """Scaled on-curve defect of an affine Weierstrass point."""
    return abs(y * y - c.p_eval(x)) / (1.0 + abs(x) ** 3 + y * y)


def point_from_affine(c: PlaneCubic, x: float, y: float, validate: bool = True) -> CurvePoint:
    x, y = float(x), float(y)
    if validate and affine_residual(c, x, y) > 1e-6:
        raise OffCurve(f"({x}, {y}) is not on the curve")
    working = ternary.normalize_point(c.transform @ np.array([1.0, x, y]))
    return CurvePoint(at_infinity=False, wx=x, wy=y, working=working)


def point_at_infinity(c: PlaneCubic) -> CurvePoint:
    working = ternary.normalize_point(c.transform @ np.array([0.0, 0.0, 1.0]))
    return CurvePoint(at_infinity=True, wx=0.0, wy=0.0, working=working)


def point_from_working(c: PlaneCubic, triple, validate: bool = True) -> CurvePoint:
    """Lift a working-coordinate triple back to a curve point."""
    wvec = np.asarray(triple, dtype=float)
    z = c.inv_transform @ wvec
    nrm = np.linalg.norm(z)
    if abs(z[0]) <= 1e-10 * nrm:
        if abs(z[1]) > 1e-6 * nrm:
            raise OffCurve("working triple lies at Weierstrass infinity but is not O")
        return point_at_infinity(c)
    return point_from_affine(c, z[1] / z[0], z[2] / z[0], validate=validate)


def points_equal(p: CurvePoint, q: CurvePoint, tol: float = POINT_TOL) -> bool:
    d = min(
        np.linalg.norm(p.working - q.working),
        np.linalg.norm(p.working + q.working),
    )
    return bool(d <= tol)


def neg(c: PlaneCubic, p: CurvePoint) -> CurvePoint:
    if p.at_infinity:
        return p
    return point_from_affine(c, p.wx, -p.wy, validate=False)


def add(c: PlaneCubic, p: CurvePoint, q: CurvePoint) -> CurvePoint:
    """Chord-tangent sum with identity O."""
    if p.at_infinity:
        return q
    if q.at_infinity:
        return p
    a, b, c0 = c.w.monic_coeffs
    same = points_equal(p, q)
    if same and abs(p.wy) <= 1e-12 * (1.0 + abs(p.wx)):
        return point_at_infinity(c)  # doubling a 2-torsion point
    if not same and points_equal(p, neg(c, q)):
        return point_at_infinity(c)  # P + (-P)
    if same:
        lam = (3.0 * p.wx * p.wx + 2.0 * a * p.wx + b) / (2.0 * p.wy)
        x3 = lam * lam - a - p.wx - q.wx
        y3 = lam * (p.wx - x3) - p.wy
        return point_from_affine(c, x3, y3, validate=False)
    if abs(q.wx) < abs(p.wx):
        p, q = q, p
    lam = (q.wy - p.wy) / (q.wx - p.wx)
    if abs(q.wx) > 1e4 * (1.0 + abs(p.wx)):
        # chord through a far-out point: lam^2 and q.wx cancel to an O(1)
        # result, so expand lam^2 - q.wx through y^2 = p(x); the cubic terms
        # then cancel exactly instead of in floating point
        num = (q.wx * q.wx * (a + 2.0 * p.wx)
               + q.wx * (b - p.wx * p.wx)
               + (c0 + p.wy * p.wy)
               - 2.0 * q.wy * p.wy)
        x3 = num / ((q.wx - p.wx) ** 2) - a - p.wx
    else:
        x3 = lam * lam - a - p.wx - q.wx
    y3 = lam * (p.wx - x3) - p.wy
    return point_from_affine(c, x3, y3, validate=False)


def divisor_sum(c: PlaneCubic, divisor) -> CurvePoint:
    """Group-law sum of a divisor's points, with multiplicity."""
    entries = getattr(divisor, "entries", divisor)
    total = point_at_infinity(c)
    for entry in entries:
        if hasattr(entry, "point"):
            pt, mult = entry.point, entry.mult
        else:
            pt, mult = entry
        if not isinstance(pt, CurvePoint):
            pt = point_from_working(c, pt)
        for _ in range(int(mult)):
            total = add(c, total, pt)
    return total


def topology(c: PlaneCubic) -> Topology:
    if c.w.pair_is_real:
        a1, a2, a3 = c.w.a1, c.w.pair[0], c.w.pair[1]
        return Topology(
            kind="TwoComponents",
            components={"Oval": (a1, a2), "Unbounded": (a3, np.inf)},
        )
    return Topology(kind="Connected", components={"Whole": (c.w.a1, np.inf)})


def two_torsion(c: PlaneCubic) -> TorsionSet:
    o = point_at_infinity(c)
    t1 = point_from_affine(c, c.w.a1, 0.0, validate=False)
    if c.w.pair_is_real:
        t2 = point_from_affine(c, c.w.pair[0], 0.0, validate=False)
        t3 = point_from_affine(c, c.w.pair[1], 0.0, validate=False)
        return TorsionSet(all_real=[o, t1, t2, t3], positive=[o, t1])
    return TorsionSet(all_real=[o, t1], positive=[o, t1])


def _component_labels(c: PlaneCubic) -> list:
    return list(topology(c).components.keys())


def component_point(c: PlaneCubic, label: str, param: float) -> CurvePoint:
    """Point of a real component from its single real parameter.

    Oval: ``param`` is an angle; the loop closes over one period.  Unbounded
    arcs: ``param = s`` in ``(-1, 1)`` through ``x = a + s^2/(1 - |s|)`` with
    the branch sign carried by ``sign(s)``; ``s = 0`` is the branch point.
    """
    topo = topology(c)
    if label not in topo.components:
        raise EmptyComponent(f"no component named {label!r}")
    if label == "Oval":
        a1, a2 = topo.components["Oval"]
        x = a1 + (a2 - a1) * 0.5 * (1.0 - np.cos(param))
        y = np.sign(np.sin(param)) * np.sqrt(max(c.p_eval(x), 0.0))
    else:
        a = topo.components[label][0]
        s = np.clip(param, -UNBOUNDED_T_MAX, UNBOUNDED_T_MAX)
        x = a + s * s / (1.0 - abs(s))
        y = np.sign(s) * np.sqrt(max(c.p_eval(x), 0.0))
    return point_from_affine(c, float(x), float(y), validate=False)


def component_param(c: PlaneCubic, p: CurvePoint) -> tuple[str, float]:
    """Inverse of :func:`component_point`; O maps to the unbounded arc limit."""
    topo = topology(c)
    if "Oval" in topo.components:
        a1, a2 = topo.components["Oval"]
        if p.at_infinity or p.wx > a2 + 1e-12:
            label = "Unbounded"
        else:
            label = "Oval"
    else:
        label = "Whole"
    if label == "Oval":
        cosv = np.clip(1.0 - 2.0 * (p.wx - a1) / (a2 - a1), -1.0, 1.0)
        theta = float(np.arccos(cosv))
        return label, theta if p.wy >= 0 else 2.0 * np.pi - theta
    a = topo.components[label][0]
    if p.at_infinity:
        return label, UNBOUNDED_T_MAX
    u = max(p.wx - a, 0.0)
    smag = 0.5 * (-u + np.sqrt(u * u + 4.0 * u))
    s = smag if p.wy >= 0 else -smag
    return label, float(s)


def sample_real_locus(
    c: PlaneCubic,
    n: int,
    component: str | None = None,
    affine_only: bool = False,
    seed: int = 0,
) -> list:
    """``n`` deterministic random points, both y-branches represented."""
    topo = topology(c)
    labels = _component_labels(c)
    if component is not None:
        if component not in topo.components:
            raise EmptyComponent(f"no component named {component!r}")
        labels = [component]
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 200 * max(n, 1):
            raise RetriesExhausted("could not sample enough affine points")
        label = labels[len(out) % len(labels)]
        branch = 1.0 if (len(out) // len(labels)) % 2 == 0 else -1.0
        if label == "Oval":
            theta = rng.uniform(0.0, np.pi)
            pt = component_point(c, label, theta if branch > 0 else 2 * np.pi - theta)
        else:
            s = rng.uniform(0.0, UNBOUNDED_T_MAX)
            pt = component_point(c, label, branch * s)
        if affine_only and abs(pt.working[0]) < 1e-6:
            continue
        out.append(pt)
    return out


def _complete_line_chart(line: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first row is the (normalized) line."""
    ell = line / np.linalg.norm(line)
    # the remaining rows span the orthogonal complement
    _, _, vt = np.linalg.svd(ell.reshape(1, 3))
    basis = vt[1:]
    return np.vstack([ell, basis])


def _shear_for_cubic_chart(g_coeffs: np.ndarray) -> np.ndarray:
    """Pick a shear fixing {w0 = 0} so the dehomogenized cubic keeps an x^3 term.

    The moment quotient rewrites x^3 into lower monomials, which needs a
    healthy x^3 coefficient; that coefficient is the value of the working
    cubic at (0 : 1 : -lambda).
    """
    best_lam, best_val = 0.0, -1.0
    for lam in (0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 0.25, -0.25):
        val = abs(ternary.eval_form(g_coeffs, 3, np.array([0.0, 1.0, -lam])))
        val /= (1.0 + lam * lam) ** 1.5
        if val > best_val:
            best_lam, best_val = lam, val
    if best_val < 1e-8:
        raise DegenerateLine("no shear yields a usable affine chart")
    shear = np.eye(3)
    shear[2, 1] = best_lam
    return shear


def with_infinity_line(c: PlaneCubic, line) -> PlaneCubic:
    """New chart sending the given working-coordinate line to {w0 = 0}."""
    line = np.asarray(line, dtype=float)
    if np.linalg.norm(line) < 1e-12:
        raise DegenerateLine("line coefficients are zero")
    chart = _complete_line_chart(line)
    m0 = chart @ c.transform
    g0 = ternary.form_compose_linear(weierstrass_coeffs(c.w), 3, np.linalg.inv(m0))
    shear = _shear_for_cubic_chart(g0 / np.linalg.norm(g0))
    return PlaneCubic(w=c.w, transform=shear @ m0)


def transform_line_to_infinity(c: PlaneCubic, p: CurvePoint, q: CurvePoint) -> PlaneCubic:
    """Compose the chart with a map sending the line through p, q to infinity."""
    if points_equal(p, q):
        raise DegenerateLine("the two points coincide")
    line = np.cross(p.working, q.working)
    if np.linalg.norm(line) < 1e-10:
        raise DegenerateLine("points do not span a line")
    return with_infinity_line(c, line)


def points_at_infinity(c: PlaneCubic) -> list:
    """Real intersections of the working curve with {w0 = 0}.

    Returns ``(point, multiplicity)`` pairs for the distinct real points; the
    list has between one and three entries.
    """
    b = ternary.restrict_to_line(
        c.working_equation, 3, np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])
    )
    b = np.real_if_close(b, tol=1e6).astype(float)
    scale = np.max(np.abs(b))
    deg = 0
    for j in range(3, -1, -1):
        if abs(b[j]) > 1e-10 * scale:
            deg = j
            break
    roots = list(np.roots(b[: deg + 1][::-1])) if deg > 0 else []
    clusters = _cluster_chordal(roots, extra_at_infinity=3 - deg, radius=1e-6)
    out = []
    for center, mult, at_inf in clusters:
        if at_inf:
            wvec = np.array([0.0, 0.0, 1.0])
        else:
            if abs(center.imag) > 1e-7 * (1.0 + abs(center)):
                continue  # complex pair, not a real point
            wvec = np.array([0.0, 1.0, float(center.real)])
        out.append((point_from_working(c, wvec, validate=False), mult))
    return out


def _cluster_chordal(roots, extra_at_infinity: int = 0, radius: float = 1e-6):
    """Single-linkage clustering of P^1 points in the chordal metric.

    Returns ``(center, multiplicity, at_infinity)`` triples.
    """
    items = [(complex(r), False) for r in roots]
    for _ in range(extra_at_infinity):
        items.append((0j, True))

    def dist(a, b):
        (ra, ia), (rb, ib) = a, b
        if ia and ib:
            return 0.0
        if ia or ib:
            fin = ra if ib else rb
            return 1.0 / np.sqrt(1.0 + abs(fin) ** 2)
        return abs(ra - rb) / np.sqrt((1.0 + abs(ra) ** 2) * (1.0 + abs(rb) ** 2))

    n = len(items)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if dist(items[i], items[j]) <= radius:
                parent[find(i)] = find(j)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    out = []
    for members in groups.values():
        at_inf = any(items[i][1] for i in members)
        finite = [items[i][0] for i in members if not items[i][1]]
        center = np.mean(finite) if (finite and not at_inf) else 0j
        out.append((center, len(members), at_inf))
    return out
