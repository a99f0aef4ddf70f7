"""Reference plane-curve fixtures used by the CLI reproduction paths and tests.

Two classical examples:

* a quartic with four ovals whose face divisors do not form a lower set: the
  quadric ``a^2 x0^2 - x1^2`` touches it at four points, and every quadric
  doubly vanishing at three of the touch points automatically vanishes at the
  fourth;
* the sextic ``x1^6 + x2^6 - x0^6`` with the circle quadric, whose zero
  divisor has four real double points plus a conjugate double pair, spanning
  an extreme ray whose real zero count is not maximal.
"""

from __future__ import annotations

import numpy as np

from . import ternary

SQRT7 = np.sqrt(7.0)

# affine x1-coordinate squared of the quartic tangency points
QUARTIC_A2 = 1.0 - 2.0 * SQRT7 / 7.0
# affine x2-coordinate squared
QUARTIC_B2 = 1.0 - 3.0 * SQRT7 / 14.0


def quartic_curve() -> tuple[np.ndarray, int]:
    """2(1 - x1^2 - 2 x2^2)(1 - 2 x1^2 - x2^2) - (4 x1^2 - 1)(4 x2^2 - 1), homogenized.

    Expanded: x0^4 - 2 x0^2 x1^2 - 2 x0^2 x2^2 + 4 x1^4 - 6 x1^2 x2^2 + 4 x2^4.
    """
    idx = ternary.index_map(4)
    c = np.zeros(ternary.n_coeffs(4))
    c[idx[(4, 0, 0)]] = 1.0
    c[idx[(2, 2, 0)]] = -2.0
    c[idx[(2, 0, 2)]] = -2.0
    c[idx[(0, 4, 0)]] = 4.0
    c[idx[(0, 2, 2)]] = -6.0
    c[idx[(0, 0, 4)]] = 4.0
    return c, 4


def quartic_quadric() -> tuple[np.ndarray, int]:
    """a^2 x0^2 - x1^2 with a^2 = 1 - 2*sqrt(7)/7."""
    idx = ternary.index_map(2)
    c = np.zeros(ternary.n_coeffs(2))
    c[idx[(2, 0, 0)]] = QUARTIC_A2
    c[idx[(0, 2, 0)]] = -1.0
    return c, 2


def quartic_tangency_points() -> np.ndarray:
    """The four tangency points (+-a, +-b) as normalized projective triples."""
    a, b = np.sqrt(QUARTIC_A2), np.sqrt(QUARTIC_B2)
    pts = []
    for sa in (1.0, -1.0):
        for sb in (1.0, -1.0):
            pts.append(ternary.normalize_point(np.array([1.0, sa * a, sb * b])))
    return np.array(pts)


def sextic_curve() -> tuple[np.ndarray, int]:
    """x1^6 + x2^6 - x0^6."""
    idx = ternary.index_map(6)
    c = np.zeros(ternary.n_coeffs(6))
    c[idx[(0, 6, 0)]] = 1.0
    c[idx[(0, 0, 6)]] = 1.0
    c[idx[(6, 0, 0)]] = -1.0
    return c, 6


def sextic_quadric() -> tuple[np.ndarray, int]:
    """The circle x1^2 + x2^2 - x0^2."""
    idx = ternary.index_map(2)
    c = np.zeros(ternary.n_coeffs(2))
    c[idx[(0, 2, 0)]] = 1.0
    c[idx[(0, 0, 2)]] = 1.0
    c[idx[(2, 0, 0)]] = -1.0
    return c, 2


def sextic_real_points() -> np.ndarray:
    """(1:0:+-1) and (1:+-1:0), normalized."""
    pts = [
        np.array([1.0, 0.0, 1.0]),
        np.array([1.0, 0.0, -1.0]),
        np.array([1.0, 1.0, 0.0]),
        np.array([1.0, -1.0, 0.0]),
    ]
    return np.array([ternary.normalize_point(p) for p in pts])


def sextic_complex_pair() -> np.ndarray:
    """(0:1:+-i), normalized."""
    return np.array(
        [
            ternary.normalize_point(np.array([0.0, 1.0, 1j])),
            ternary.normalize_point(np.array([0.0, 1.0, -1j])),
        ]
    )
