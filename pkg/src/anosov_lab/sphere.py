"""Geometry of the round unit sphere: points, unit tangent vectors, great-circle
motion and circular obstacles.

Points and vectors are plain ``numpy`` arrays of shape ``(3,)``; the small
dataclasses below only bundle them and check their invariants.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OverlappingObstacles, RadiusOutOfRange

UNIT_TOL = 1e-12
DISJOINT_TOL = 1e-10


def unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return x / n


@dataclass(frozen=True)
class TangentState:
    """A point ``q`` of the sphere together with a unit tangent vector ``v``."""

    q: np.ndarray
    v: np.ndarray

    @classmethod
    def make(cls, q, v) -> "TangentState":
        """Normalize ``q`` and project ``v`` onto the tangent plane at ``q``."""
        q = unit(q)
        v = np.asarray(v, dtype=float)
        v = unit(v - np.dot(v, q) * q)
        return cls(q, v)

    def is_valid(self, tol: float = UNIT_TOL) -> bool:
        return (
            abs(np.dot(self.q, self.q) - 1.0) <= tol
            and abs(np.dot(self.v, self.v) - 1.0) <= tol
            and abs(np.dot(self.q, self.v)) <= tol
        )

    def renormalized(self) -> "TangentState":
        q = self.q / np.linalg.norm(self.q)
        v = self.v - np.dot(self.v, q) * q
        return TangentState(q, v / np.linalg.norm(v))


@dataclass(frozen=True)
class SphericalCircle:
    """Open spherical disk of angular ``radius`` about ``center``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", unit(self.center))
        object.__setattr__(self, "radius", float(self.radius))


def geodesic_flow(s: TangentState, t: float) -> TangentState:
    """Move ``t`` units of arclength along the great circle through ``s``."""
    c, sn = np.cos(t), np.sin(t)
    q = s.q * c + s.v * sn
    v = -s.q * sn + s.v * c
    # re-orthonormalize; the closed form is exact but floats drift
    q = q / np.linalg.norm(q)
    v = v - np.dot(v, q) * q
    return TangentState(q, v / np.linalg.norm(v))


def spherical_distance(a, b) -> float:
    return float(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))


def obstacle_geodesic_curvature(c: SphericalCircle) -> float:
    """Unsigned geodesic curvature ``cot(radius)`` of the obstacle boundary."""
    return 1.0 / np.tan(c.radius)


@dataclass(frozen=True)
class BilliardTable:
    """The complement in the sphere of finitely many disjoint closed disks."""

    obstacles: tuple
    distances: np.ndarray = field(repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.obstacles)

    @property
    def max_radius(self) -> float:
        return max(o.radius for o in self.obstacles)

    @property
    def centers(self) -> np.ndarray:
        return np.array([o.center for o in self.obstacles])

    @property
    def radii(self) -> np.ndarray:
        return np.array([o.radius for o in self.obstacles])

    def min_gap(self) -> float:
        """Smallest ``d(c_i, c_j) - r_i - r_j`` over pairs (``inf`` for one obstacle)."""
        r = self.radii
        gaps = self.distances - r[:, None] - r[None, :]
        np.fill_diagonal(gaps, np.inf)
        return float(gaps.min())

    def contains(self, q, tol: float = 0.0) -> bool:
        """True when ``q`` is outside every open obstacle (up to ``tol``)."""
        d = np.arccos(np.clip(self.centers @ q, -1.0, 1.0))
        return bool(np.all(d >= self.radii - tol))


def validate_table(obstacles) -> BilliardTable:
    obstacles = tuple(obstacles)
    if not obstacles:
        raise ValueError("a billiard table needs at least one obstacle")
    for i, o in enumerate(obstacles):
        if not (0.0 < o.radius < np.pi / 2):
            raise RadiusOutOfRange(i, o.radius)
    centers = np.array([o.center for o in obstacles])
    dist = np.arccos(np.clip(centers @ centers.T, -1.0, 1.0))
    n = len(obstacles)
    for i in range(n):
        for j in range(i + 1, n):
            rsum = obstacles[i].radius + obstacles[j].radius
            if not dist[i, j] > rsum + DISJOINT_TOL:
                raise OverlappingObstacles(i, j, dist[i, j], rsum)
    return BilliardTable(obstacles, dist)


def tangent_basis(n) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair spanning the plane orthogonal to the unit vector ``n``."""
    n = unit(n)
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = unit(a - np.dot(a, n) * n)
    return e1, np.cross(n, e1)


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    x = rng.standard_normal((n, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)
