"""Canonical obstacle configurations."""
from __future__ import annotations

import itertools

import numpy as np

from .sphere import BilliardTable, SphericalCircle, validate_table

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

# obstacles of the icosahedral table are disjoint iff R < arctan(2)/2
ICOSAHEDRON_CRITICAL_RADIUS = np.arctan(2.0) / 2.0


def icosahedron_vertices() -> np.ndarray:
    pts = []
    for s1, s2 in itertools.product((-1.0, 1.0), repeat=2):
        pts.append((0.0, s1, s2 * GOLDEN))
        pts.append((s1, s2 * GOLDEN, 0.0))
        pts.append((s2 * GOLDEN, 0.0, s1))
    pts = np.array(pts)
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def octahedron_vertices() -> np.ndarray:
    return np.vstack([np.eye(3), -np.eye(3)])


def gen_platonic_table(kind: str, radius: float) -> BilliardTable:
    if kind == "icosahedron":
        verts = icosahedron_vertices()
    elif kind == "octahedron":
        verts = octahedron_vertices()
    else:
        raise ValueError(f"unknown platonic table {kind!r}")
    return validate_table(SphericalCircle(c, radius) for c in verts)


def table_to_dict(table: BilliardTable) -> dict:
    return {
        "obstacles": [
            {"center": [float(x) for x in o.center], "radius": float(o.radius)}
            for o in table.obstacles
        ]
    }


def table_from_dict(d: dict) -> BilliardTable:
    return validate_table(
        SphericalCircle(np.array(o["center"], dtype=float), float(o["radius"]))
        for o in d["obstacles"]
    )
