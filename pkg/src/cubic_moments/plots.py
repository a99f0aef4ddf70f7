"""Figure rendering for CLI reports.

Uses the non-interactive Agg backend so figures render identically in
headless environments.
"""

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from . import curve as curve_mod


def atom_count_histogram(path, histogram: dict, predicted: int) -> None:
    """Bar chart of minimal atom counts against the predicted bound."""
    ks = sorted(histogram)
    counts = [histogram[k] for k in ks]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.bar(ks, counts, width=0.7, color="#3465a4", edgecolor="black")
    ax.axvline(predicted, color="#cc0000", linestyle="--",
               label=f"predicted bound {predicted}")
    ax.set_xlabel("minimal atom count")
    ax.set_ylabel("trials")
    ax.set_xticks(ks)
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _branch_xy(c, label: str, n: int = 400) -> tuple:
    """Plot-ready (x, y) arrays for one y-branch pair of a component."""
    topo = curve_mod.topology(c)
    lo, hi = topo.components[label]
    if np.isinf(hi):
        hi = lo + 6.0
    xs = np.linspace(lo, hi, n)
    ys = np.sqrt(np.maximum(c.p_eval(xs), 0.0))
    # trace up one branch and back down the other for a closed-looking arc
    return np.concatenate([xs, xs[::-1]]), np.concatenate([ys, -ys[::-1]])


def curve_with_atoms(path, c, groups: list, title: str = "") -> None:
    """Real locus of a Weierstrass cubic with labelled atom groups.

    ``groups`` is a list of ``(label, points, marker)`` with affine
    ``CurvePoint`` entries.
    """
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for label in curve_mod.topology(c).components:
        xs, ys = _branch_xy(c, label)
        ax.plot(xs, ys, color="#555555", linewidth=1.0)
    for label, pts, marker in groups:
        xs = [p.wx for p in pts if not p.at_infinity]
        ys = [p.wy for p in pts if not p.at_infinity]
        ax.plot(xs, ys, marker, label=label, markersize=7)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
