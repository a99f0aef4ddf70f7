"""Dense homogeneous ternary forms.

A form of degree ``m`` in variables ``z0, z1, z2`` is stored as a coefficient
vector over the degree-``m`` monomials in graded-lex order, i.e. exponent
triples ``(e0, e1, e2)`` with ``e0 + e1 + e2 = m`` sorted lexicographically
descending::

    degree 2:  z0^2, z0*z1, z0*z2, z1^2, z1*z2, z2^2

All helpers are plain numpy; degrees stay small (<= 8) throughout the package
so nothing here is performance critical.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def exponents(degree: int) -> tuple[tuple[int, int, int], ...]:
    """Exponent triples of the degree-``degree`` monomials, graded-lex order."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    out = []
    for e0 in range(degree, -1, -1):
        for e1 in range(degree - e0, -1, -1):
            out.append((e0, e1, degree - e0 - e1))
    return tuple(out)


@lru_cache(maxsize=None)
def index_map(degree: int) -> dict:
    return {e: i for i, e in enumerate(exponents(degree))}


def n_coeffs(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


def eval_form(coeffs: np.ndarray, degree: int, points: np.ndarray) -> np.ndarray:
    """Evaluate the form at ``points`` (shape ``(n, 3)`` or ``(3,)``)."""
    pts = np.atleast_2d(np.asarray(points))
    expo = np.array(exponents(degree))  # (n_mono, 3)
    # power table per coordinate, then product over the three exponents
    vals = (
        pts[:, None, 0] ** expo[None, :, 0]
        * pts[:, None, 1] ** expo[None, :, 1]
        * pts[:, None, 2] ** expo[None, :, 2]
    )
    out = vals @ np.asarray(coeffs)
    if np.ndim(points) == 1:
        return out[0]
    return out


def form_product(c1: np.ndarray, d1: int, c2: np.ndarray, d2: int) -> np.ndarray:
    """Coefficients of the product form of degree ``d1 + d2``."""
    idx = index_map(d1 + d2)
    out = np.zeros(n_coeffs(d1 + d2), dtype=np.common_type(np.asarray(c1), np.asarray(c2)))
    e1s, e2s = exponents(d1), exponents(d2)
    for i, a in enumerate(e1s):
        ca = c1[i]
        if ca == 0:
            continue
        for j, b in enumerate(e2s):
            cb = c2[j]
            if cb == 0:
                continue
            out[idx[(a[0] + b[0], a[1] + b[1], a[2] + b[2])]] += ca * cb
    return out


def form_power(coeffs: np.ndarray, degree: int, k: int) -> tuple[np.ndarray, int]:
    """``(coeffs, degree)`` of the ``k``-th power of a form."""
    out, od = np.array([1.0]), 0
    for _ in range(k):
        out = form_product(out, od, coeffs, degree)
        od += degree
    return out, od


def form_compose_linear(coeffs: np.ndarray, degree: int, mat: np.ndarray) -> np.ndarray:
    """Coefficients of ``F(M @ w)`` given the coefficients of ``F(z)``.

    Expands each monomial ``z^a`` as the product of the linear forms given by
    the rows of ``M``.
    """
    mat = np.asarray(mat, dtype=float)
    rows = [mat[t] for t in range(3)]
    out = np.zeros(n_coeffs(degree), dtype=np.asarray(coeffs).dtype)
    lin_deg = 1
    for i, (e0, e1, e2) in enumerate(exponents(degree)):
        ca = coeffs[i]
        if ca == 0:
            continue
        term, td = np.array([1.0]), 0
        for t, e in ((0, e0), (1, e1), (2, e2)):
            for _ in range(e):
                term = form_product(term, td, rows[t], lin_deg)
                td += 1
        out = out + ca * term
    return out


def gradient(coeffs: np.ndarray, degree: int) -> list[np.ndarray]:
    """Coefficient vectors of the three partial derivatives (degree - 1)."""
    if degree == 0:
        return [np.zeros(1), np.zeros(1), np.zeros(1)]
    idx = index_map(degree - 1)
    grads = [np.zeros(n_coeffs(degree - 1), dtype=np.asarray(coeffs).dtype) for _ in range(3)]
    for i, e in enumerate(exponents(degree)):
        for t in range(3):
            if e[t] > 0:
                f = list(e)
                f[t] -= 1
                grads[t][idx[tuple(f)]] += e[t] * coeffs[i]
    return grads


def eval_gradient(coeffs: np.ndarray, degree: int, point: np.ndarray) -> np.ndarray:
    g = gradient(coeffs, degree)
    return np.array([eval_form(gt, degree - 1, point) for gt in g])


def restrict_to_line(coeffs: np.ndarray, degree: int, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Binary-form coefficients of ``t -> F(s*p + t*q)``.

    Returns ``b`` with ``F(s p + t q) = sum_j b[j] s^(m-j) t^j``.
    """
    out = np.zeros(degree + 1, dtype=complex)
    for i, (e0, e1, e2) in enumerate(exponents(degree)):
        ca = coeffs[i]
        if ca == 0:
            continue
        term = np.array([1.0 + 0j])
        for t, e in ((0, e0), (1, e1), (2, e2)):
            lin = np.array([p[t], q[t]], dtype=complex)  # s*p_t + t*q_t
            for _ in range(e):
                term = np.convolve(term, lin)
        out[: term.size] += ca * term
    return out


def dehomogenize(coeffs: np.ndarray, degree: int) -> dict:
    """Affine dict ``{(i, j): c}`` of ``F(1, u, v)``."""
    poly: dict = {}
    for i, (_, e1, e2) in enumerate(exponents(degree)):
        if coeffs[i] != 0:
            poly[(e1, e2)] = poly.get((e1, e2), 0.0) + coeffs[i]
    return poly


def homogenize(poly: dict, degree: int) -> np.ndarray:
    """Degree-``degree`` coefficients of ``z0^(degree-i-j) z1^i z2^j`` terms."""
    idx = index_map(degree)
    out = np.zeros(n_coeffs(degree))
    for (i, j), c in poly.items():
        if i + j > degree:
            raise ValueError("affine degree exceeds homogenization degree")
        out[idx[(degree - i - j, i, j)]] += c
    return out


def normalize_point(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Projective normal form: unit norm, first significant coordinate positive.

    Complex vectors are additionally rotated so that the first significant
    coordinate is real positive, which makes conjugate pairs recognizable.
    """
    v = np.asarray(v)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("zero vector is not a projective point")
    v = v / nrm
    for c in v:
        if abs(c) > tol:
            v = v * (abs(c) / c)
            break
    if np.iscomplexobj(v) and np.max(np.abs(v.imag)) < 1e-12:
        v = v.real
    return v
