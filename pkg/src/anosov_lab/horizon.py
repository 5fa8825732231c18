"""Horizon of a spherical billiard: the longest great-circle arc avoiding all
obstacles.

A great circle is described by its pole ``p``.  With an orthonormal frame
``(e1, e2)`` of the plane orthogonal to ``p`` the circle is
``q(phi) = cos(phi) e1 + sin(phi) e2`` and obstacle ``i`` blocks the angles where
``<q(phi), c_i> > cos r_i``, an interval of half-width
``arccos(cos r_i / sqrt(1 - <p, c_i>^2))`` about ``atan2(<e2,c_i>, <e1,c_i>)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .sphere import BilliardTable, tangent_basis, unit

TWO_PI = 2.0 * np.pi


@dataclass
class HorizonResult:
    H: float
    unbounded: bool
    pole: np.ndarray
    arc: tuple  # (start angle, end angle) in the frame of ``circle_frame(pole)``
    grid_n: int = 0
    refine_iters: int = 0
    grid_spacing: float = 0.0

    def to_dict(self) -> dict:
        return {
            "H": None if self.unbounded else float(self.H),
            "pole": [float(x) for x in self.pole],
            "arc": [float(self.arc[0]), float(self.arc[1])],
            "unbounded": bool(self.unbounded),
            "grid_n": int(self.grid_n),
            "refine_iters": int(self.refine_iters),
            "grid_spacing": float(self.grid_spacing),
        }

    def arc_points(self, n: int = 256) -> np.ndarray:
        e1, e2 = circle_frame(self.pole)
        phi = np.linspace(self.arc[0], self.arc[1], n)
        return np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2


def circle_frame(pole) -> tuple[np.ndarray, np.ndarray]:
    return tangent_basis(pole)


def blocked_intervals(table: BilliardTable, pole) -> list[tuple[float, float]]:
    """Open angular intervals (center - w, center + w) blocked by each obstacle."""
    e1, e2 = circle_frame(pole)
    out = []
    for c, r in zip(table.centers, table.radii):
        a, b = np.dot(e1, c), np.dot(e2, c)
        rho = np.hypot(a, b)
        if rho <= np.cos(r):
            continue
        w = np.arccos(np.cos(r) / rho)
        mid = np.arctan2(b, a)
        out.append((mid - w, mid + w))
    return out


def free_arcs_on_circle(table: BilliardTable, pole) -> list[tuple[float, float]]:
    """Maximal free arcs ``(start, length)`` of the great circle with this pole.

    The full circle ``(0, 2 pi)`` is returned when no obstacle meets it.
    """
    iv = blocked_intervals(table, pole)
    if not iv:
        return [(0.0, TWO_PI)]
    iv = sorted(((a % TWO_PI), (a % TWO_PI) + (b - a)) for a, b in iv)
    # sweep two turns so that intervals crossing the cut are merged correctly
    doubled = iv + [(a + TWO_PI, b + TWO_PI) for a, b in iv]
    n = len(iv)
    arcs = []
    reach = -np.inf
    for k in range(2 * n - 1):
        reach = max(reach, doubled[k][1])
        if k >= n - 1:
            gap = doubled[k + 1][0] - reach
            if gap > 0.0:
                arcs.append((reach % TWO_PI, gap))
    return arcs


def fibonacci_hemisphere(n: int) -> np.ndarray:
    """Near-uniform points on the upper hemisphere (poles up to sign)."""
    i = np.arange(n) + 0.5
    z = 1.0 - i / n
    rad = np.sqrt(1.0 - z * z)
    ang = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang), z])


def _frames(poles: np.ndarray):
    a = np.where(np.abs(poles[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    e1 = a - np.sum(a * poles, axis=1, keepdims=True) * poles
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(poles, e1)
    return e1, e2


def longest_free_arcs(table: BilliardTable, poles: np.ndarray):
    """Vectorized longest free arc for many poles.

    Returns ``(length, start)``; length is ``2 pi`` for a free great circle.
    """
    poles = np.asarray(poles, dtype=float)
    e1, e2 = _frames(poles)
    c, r = table.centers, table.radii
    a = e1 @ c.T
    b = e2 @ c.T
    rho = np.hypot(a, b)
    blocks = rho > np.cos(r)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.arccos(np.clip(np.cos(r)[None, :] / rho, -1.0, 1.0))
    start = np.mod(np.arctan2(b, a) - w, TWO_PI)
    end = start + 2.0 * w
    any_block = blocks.any(axis=1)
    # non-blocking obstacles are replaced by a copy of the widest blocking one
    width = np.where(blocks, w, -1.0)
    k = np.argmax(width, axis=1)
    rows = np.arange(len(poles))
    start = np.where(blocks, start, start[rows, k][:, None])
    end = np.where(blocks, end, end[rows, k][:, None])
    order = np.argsort(start, axis=1)
    start = np.take_along_axis(start, order, axis=1)
    end = np.take_along_axis(end, order, axis=1)
    n = start.shape[1]
    s2 = np.concatenate([start, start + TWO_PI], axis=1)
    e2_ = np.concatenate([end, end + TWO_PI], axis=1)
    reach = np.maximum.accumulate(e2_, axis=1)
    gaps = s2[:, n:] - reach[:, n - 1:2 * n - 1]
    j = np.argmax(gaps, axis=1)
    length = np.maximum(gaps[rows, j], 0.0)
    arc_start = np.mod(reach[:, n - 1:2 * n - 1][rows, j], TWO_PI)
    length = np.where(any_block, length, TWO_PI)
    arc_start = np.where(any_block, arc_start, 0.0)
    return length, arc_start


def _local_chart(p0):
    e1, e2 = tangent_basis(p0)

    def to_pole(x):
        return unit(p0 + x[0] * e1 + x[1] * e2)

    return to_pole


def horizon(table: BilliardTable, grid_n: int = 20000, refine_iters: int = 3,
            n_starts: int = 8) -> HorizonResult:
    """Longest free great-circle arc.

    A Fibonacci grid of poles is searched first; the best ``n_starts`` poles are
    then polished by Nelder-Mead rounds in a tangent chart.  The value is a lower
    bound for the true horizon; ``grid_spacing`` reports the grid resolution.
    """
    poles = fibonacci_hemisphere(grid_n)
    length, start = longest_free_arcs(table, poles)
    spacing = float(np.sqrt(TWO_PI / grid_n))
    if np.any(length >= TWO_PI):
        i = int(np.argmax(length))
        return HorizonResult(np.inf, True, poles[i], (0.0, TWO_PI), grid_n,
                             refine_iters, spacing)

    best = int(np.argmax(length))
    best_pole, best_len = poles[best], float(length[best])

    if refine_iters > 0:
        cand = np.argsort(-length)[:n_starts]
        for i in cand:
            p = poles[i]
            for _ in range(refine_iters):
                to_pole = _local_chart(p)

                def f(x):
                    return -float(longest_free_arcs(table, to_pole(x)[None, :])[0][0])

                res = minimize(f, np.zeros(2), method="Nelder-Mead",
                               options={"xatol": 1e-10, "fatol": 1e-12,
                                        "initial_simplex": np.array(
                                            [[0.0, 0.0], [spacing, 0.0], [0.0, spacing]])})
                p = to_pole(res.x)
                if -res.fun > best_len:
                    best_len, best_pole = -res.fun, p
                if -res.fun >= TWO_PI:
                    break

    if best_len >= TWO_PI:
        return HorizonResult(np.inf, True, best_pole, (0.0, TWO_PI), grid_n,
                             refine_iters, spacing)
    length, start = longest_free_arcs(table, best_pole[None, :])
    a0 = float(start[0])
    return HorizonResult(float(length[0]), False, best_pole, (a0, a0 + float(length[0])),
                         grid_n, refine_iters, spacing)
