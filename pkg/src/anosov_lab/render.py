"""Static SVG figures: tables with arcs and trajectories, tube profiles colored by K."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import _kernels as kn
from .sphere import BilliardTable, tangent_basis

SIZE = 600


def _view_frame(view) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = np.asarray(view, dtype=float)
    d = d / np.linalg.norm(d)
    e1, e2 = tangent_basis(d)
    return d, e1, e2


def _polyline(points2d, style: str) -> str:
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in points2d)
    return f'<polyline points="{pts}" {style}/>'


def _split_visible(P: np.ndarray, d: np.ndarray, e1, e2):
    """Screen coordinates of the front-facing runs of a curve on the sphere."""
    front = P @ d >= 0.0
    scr = np.column_stack([P @ e1, -(P @ e2)]) * (0.45 * SIZE) + SIZE / 2
    runs, cur = [], []
    for ok, p in zip(front, scr):
        if ok:
            cur.append(p)
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return [r for r in runs if len(r) > 1]


def _circle_points(center, radius: float, n: int = 180) -> np.ndarray:
    e1, e2 = tangent_basis(center)
    a = np.linspace(0.0, 2 * math.pi, n + 1)
    return (math.cos(radius) * np.asarray(center)
            + math.sin(radius) * (np.cos(a)[:, None] * e1 + np.sin(a)[:, None] * e2))


def render_table_svg(table: BilliardTable, path, view=(0.3, 0.2, 1.0), arc_points=None,
                     trajectories=()) -> Path:
    """Orthographic picture of the front hemisphere seen from ``view``.

    ``arc_points`` (for example a maximal free arc) is drawn in red and each
    trajectory, an array of unit vectors, as a thin blue polyline.
    """
    d, e1, e2 = _view_frame(view)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
           f'viewBox="0 0 {SIZE} {SIZE}">',
           f'<circle cx="{SIZE / 2}" cy="{SIZE / 2}" r="{0.45 * SIZE}" fill="white" '
           'stroke="black" stroke-width="1"/>']
    for o in table.obstacles:
        for run in _split_visible(_circle_points(o.center, o.radius), d, e1, e2):
            out.append(_polyline(run, 'fill="#ccc" stroke="black" stroke-width="1"'))
    for traj in trajectories:
        for run in _split_visible(np.asarray(traj, dtype=float), d, e1, e2):
            out.append(_polyline(run, 'fill="none" stroke="#1f5fbf" stroke-width="0.7"'))
    if arc_points is not None:
        for run in _split_visible(np.asarray(arc_points, dtype=float), d, e1, e2):
            out.append(_polyline(run, 'fill="none" stroke="#d62728" stroke-width="2.5"'))
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path


def _k_color(k: float, scale: float) -> str:
    # diverging: blue for negative curvature, red for positive, log-compressed
    t = math.copysign(math.log1p(abs(k)) / math.log1p(scale), k) if scale > 0 else 0.0
    t = max(-1.0, min(1.0, t))
    if t < 0:
        r, g, b = 1 + t, 1 + t, 1.0
    else:
        r, g, b = 1.0, 1 - t, 1 - t
    return f"#{int(255 * r):02x}{int(255 * g):02x}{int(255 * b):02x}"


def render_profile_svg(surface, path, n: int = 800) -> Path:
    """The profile curve of a tube in its model coordinates, colored by the
    Gauss curvature (blue negative, red positive, logarithmic scale)."""
    lo, hi = surface.u_range
    u = np.linspace(lo, hi, n)
    xy = np.array([surface.model_coordinates(s) for s in u])
    packed = surface.packed()
    K = np.array([kn.surface_eval(s, *packed)[4] for s in u])
    span = np.ptp(xy, axis=0)
    span[span == 0] = 1.0
    sc = 0.9 * SIZE / span  # axes scaled independently: flattened tubes are thin
    scr = np.column_stack([(xy[:, 0] - xy[:, 0].min()) * sc[0] + 0.05 * SIZE,
                           SIZE - ((xy[:, 1] - xy[:, 1].min()) * sc[1] + 0.05 * SIZE)])
    scale = float(np.max(np.abs(K)))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
           f'viewBox="0 0 {SIZE} {SIZE}">', f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>']
    for k in range(n - 1):
        (x0, y0), (x1, y1) = scr[k], scr[k + 1]
        col = _k_color(0.5 * (K[k] + K[k + 1]), scale)
        out.append(f'<line x1="{x0:.3f}" y1="{y0:.3f}" x2="{x1:.3f}" y2="{y1:.3f}" '
                   f'stroke="{col}" stroke-width="3"/>')
    out.append(f'<text x="10" y="20" font-size="12">K range [{K.min():.3g}, {K.max():.3g}]</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
