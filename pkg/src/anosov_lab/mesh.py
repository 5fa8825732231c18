"""Triangulation of an assembly, Euler characteristic and Gauss-Bonnet quadrature."""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from . import _kernels as kn
from .horizon import fibonacci_hemisphere
from .sphere import tangent_basis
from .surface import Assembly, conformal_factor


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    curvature: np.ndarray
    genus: int

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(edge_counts(self.triangles)) + len(self.triangles)

    def write_obj(self, path) -> None:
        path = Path(path)
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write("v {!r} {!r} {!r}\n".format(*map(float, v)))
            for t in self.triangles:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        with open(path.with_suffix(".K.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertex", "K"])
            for i, k in enumerate(self.curvature):
                w.writerow([i + 1, repr(float(k))])


def edge_counts(triangles: np.ndarray) -> dict:
    counts: dict = {}
    for a, b, c in triangles:
        for e in ((a, b), (b, c), (c, a)):
            key = (min(e), max(e))
            counts[key] = counts.get(key, 0) + 1
    return counts


def is_closed_oriented(triangles: np.ndarray) -> bool:
    """Every edge is used by exactly two triangles, once in each direction."""
    directed = set()
    for a, b, c in triangles:
        for e in ((a, b), (b, c), (c, a)):
            if e in directed:
                return False
            directed.add(e)
    return all((b, a) in directed for a, b in directed)


def _sphere_points(n: int) -> np.ndarray:
    h = fibonacci_hemisphere(n)
    return np.vstack([h, h * np.array([1.0, 1.0, -1.0])])


def _tube_rows(asm: Assembly, i: int, n_rows: int) -> np.ndarray:
    """Profile parameters of the mesh rings of tube ``i``.

    Greedy bisection: the interval whose trapezoid estimate of the curvature
    mass or of the area changes most on halving is split next.
    """
    tube = asm.tubes[i]
    packed = tube.packed()
    U = tube.profile.u_max

    def dens(u):
        E, _, G, _, K, _, _ = kn.surface_eval(u, *packed)
        a = 2 * math.pi * math.sqrt(E * G)
        return K * a, a

    def err(a, fa, b, fb):
        m = 0.5 * (a + b)
        fm = dens(m)
        h = b - a
        e = max(abs(0.5 * h * (fa[k] + fb[k]) - 0.25 * h * (fa[k] + 2 * fm[k] + fb[k])) / scale[k]
                for k in range(2))
        return e

    seed = np.linspace(-U, U, 9)
    vals = {u: dens(u) for u in seed}
    coarse = np.linspace(-U, U, 2001)
    cv = np.array([dens(u) for u in coarse])
    scale = (np.trapezoid(np.abs(cv[:, 0]), coarse) + 1e-300, np.trapezoid(cv[:, 1], coarse))
    heap = []
    for a, b in zip(seed[:-1], seed[1:]):
        heapq.heappush(heap, (-err(a, vals[a], b, vals[b]), a, b))
    while len(vals) < n_rows:
        _, a, b = heapq.heappop(heap)
        m = 0.5 * (a + b)
        vals[m] = dens(m)
        heapq.heappush(heap, (-err(a, vals[a], m, vals[m]), a, m))
        heapq.heappush(heap, (-err(m, vals[m], b, vals[b]), m, b))
    return np.array(sorted(vals))


def export_mesh(asm: Assembly, resolution: int = 256, path=None) -> SurfaceMesh:
    """Triangulate sheets and tubes; ``resolution`` vertices on every ring.

    The sheets are cut from a convex hull of near-uniform sphere points plus
    the rings ``phi = r_i + delta``; each tube is a strip of quads between its
    two rings.  Per-vertex Gauss curvature comes from the analytic formulas.
    """
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    n = asm.n
    radii = asm.enlarged_radii
    centers = asm.table.centers
    ring_step = 2 * math.pi * float(np.min(np.sin(radii))) / resolution
    sheet_step = 2.0 * ring_step
    n_fib = int(4 * math.pi / sheet_step ** 2 / 2)
    pts = _sphere_points(max(n_fib, 64))
    keep = np.all(pts @ centers.T < np.cos(radii + 0.5 * sheet_step)[None, :], axis=1)
    pts = pts[keep]
    ang = 2 * math.pi * np.arange(resolution) / resolution
    rings = []
    for c, r in zip(centers, radii):
        e1, e2 = tangent_basis(c)
        around = np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2
        rings.append(np.sin(r) * around + np.cos(r) * c)
    ring_pts = np.vstack(rings)
    ring_id = np.concatenate([np.full(resolution, k) for k in range(n)] + [np.full(len(pts), -1)])
    sphere = np.vstack([ring_pts, pts])
    hull = ConvexHull(sphere)
    tri = hull.simplices
    ids = ring_id[tri]
    cap = (ids[:, 0] >= 0) & (ids[:, 0] == ids[:, 1]) & (ids[:, 1] == ids[:, 2])
    tri = tri[~cap]
    # outward orientation on the unit sphere
    a, b, c = sphere[tri[:, 0]], sphere[tri[:, 1]], sphere[tri[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]

    m = len(sphere)
    out_r = math.exp(asm.sheet_level)
    in_r = math.exp(asm.inner_level)
    verts = [sphere * out_r, sphere * in_r]
    K_out = 1.0 / asm.sheet_factor(True) ** 2
    K_in = 1.0 / asm.sheet_factor(False) ** 2
    curv = [np.full(m, K_out), np.full(m, K_in)]
    tris = [tri, tri[:, [0, 2, 1]] + m]
    # tubes: rings at the sheets are shared with the sheet vertices
    base = 2 * m
    for i, tube in enumerate(asm.tubes):
        rows = _tube_rows(asm, i, resolution)
        inner_rows = rows[1:-1]
        pts3 = tube.embed(np.repeat(inner_rows, resolution),
                          np.tile(ang, len(inner_rows)))
        packed = tube.packed()
        kv = np.repeat([kn.surface_eval(u, *packed)[4] for u in inner_rows], resolution)
        verts.append(pts3)
        curv.append(kv)
        # ring index helpers: row 0 is the inner sheet ring, last row the outer one
        def vid(row, k, i=i, base=base, nr=len(rows)):
            k %= resolution
            if row == 0:
                return m + i * resolution + k
            if row == nr - 1:
                return i * resolution + k
            return base + (row - 1) * resolution + k

        strip = []
        for row in range(len(rows) - 1):
            for k in range(resolution):
                p00, p01 = vid(row, k), vid(row, k + 1)
                p10, p11 = vid(row + 1, k), vid(row + 1, k + 1)
                strip.append((p00, p11, p10))
                strip.append((p00, p01, p11))
        strip = np.array(strip)
        tris.append(strip)
        base += len(pts3)
    V = np.vstack(verts)
    T = np.vstack(tris)
    if not is_closed_oriented(T):
        # tube strips follow the sheets' orientation only up to a global flip
        fixed = [tris[0], tris[1]] + [s[:, [0, 2, 1]] for s in tris[2:]]
        T = np.vstack(fixed)
    mesh = SurfaceMesh(V, T, np.concatenate(curv), asm.genus)
    if path is not None:
        mesh.write_obj(path)
    return mesh


def triangle_areas(asm: Assembly, mesh: SurfaceMesh) -> np.ndarray:
    """Areas in the ambient metric (Euclidean area times ``xi^2`` at the
    centroid for the spherical model)."""
    a, b, c = (mesh.vertices[mesh.triangles[:, k]] for k in range(3))
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    if asm.ambient == "spherical":
        area = area * conformal_factor((a + b + c) / 3.0) ** 2
    return area


def gauss_bonnet_integral(asm: Assembly, mesh: SurfaceMesh) -> float:
    """Triangle quadrature of the total curvature, vertex-averaged ``K``."""
    area = triangle_areas(asm, mesh)
    k = mesh.curvature[mesh.triangles].mean(axis=1)
    return float(np.sum(area * k))
