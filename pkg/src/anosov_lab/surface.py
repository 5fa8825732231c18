"""Surfaces approximating a spherical billiard, in the stereographic model of
S^3 or in Euclidean space.

The assembly consists of two sheets, the billiard domain pushed to the spheres
``|q| = 1 - sigma`` and ``|q| = 1/(1 - sigma)`` with enlarged holes, joined by a
tube of revolution around each obstacle axis whose waist is the obstacle
boundary circle on the unit sphere.  Each region is rotationally symmetric, so
everything is described by a profile curve and the metric
``E(u) du^2 + G(u) dtheta^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import _kernels as kn
from .errors import DeltaTooLarge, DomainError
from .profile import ProfileCurve, max_collar_width, tube_profile
from .sphere import BilliardTable, tangent_basis

AMBIENTS = {"spherical": 0, "euclidean": 1}


def conformal_factor(q) -> np.ndarray:
    """``xi(q) = 2 / (1 + |q|^2)``: the round metric of S^3 is ``xi^2`` times
    the Euclidean one in stereographic coordinates."""
    q = np.asarray(q, dtype=float)
    return 2.0 / (1.0 + np.sum(q * q, axis=-1))


def flatten_points(q, epsilon: float) -> np.ndarray:
    """``q -> eps q + (1 - eps) q / |q|``: pushes points radially toward the
    unit sphere, which stays fixed."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    return epsilon * q + (1.0 - epsilon) * q / n


def flatten_level(lam: float, epsilon: float) -> float:
    """Image of ``ln |q|`` under the flattening map."""
    return math.log(epsilon * math.exp(lam) + 1.0 - epsilon)


@dataclass(frozen=True)
class RevolutionSurface:
    profile: ProfileCurve
    axis: np.ndarray
    ambient: str = "spherical"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.ambient not in AMBIENTS:
            raise ValueError(f"unknown ambient {self.ambient!r}")
        if self.profile.kind == "cylindrical" and (self.ambient != "euclidean"
                                                   or self.epsilon != 1.0):
            raise ValueError("cylindrical profiles live in Euclidean space, unflattened")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")

    def packed(self):
        return self.profile.packed(self.epsilon, AMBIENTS[self.ambient])

    @property
    def u_range(self) -> tuple[float, float]:
        return self.profile.u_min, self.profile.u_max

    def _check(self, u):
        lo, hi = self.u_range
        if not (lo - 1e-12 <= u <= hi + 1e-12):
            raise DomainError(f"parameter {u} outside [{lo}, {hi}]")

    def evaluate(self, u: float):
        """``(E, E', G, G', K, k_rot, k_prof)`` at profile parameter ``u``."""
        self._check(u)
        return kn.surface_eval(float(u), *self.packed())

    def metric(self, u: float):
        E, Ep, G, Gp, *_ = self.evaluate(u)
        return E, Ep, G, Gp

    def gauss_curvature(self, u: float) -> float:
        return self.evaluate(u)[4]

    def principal_curvatures(self, u: float) -> tuple[float, float]:
        """Curvatures along the rotation circle and along the profile, for the
        normal pointing away from the axis."""
        e = self.evaluate(u)
        return e[5], e[6]

    def model_coordinates(self, u: float) -> tuple[float, float]:
        """``(phi, Lambda)`` or ``(r, z)`` after flattening."""
        x, y, *_ = self.profile.jet(u)
        if self.profile.kind == "cylindrical":
            return x, y
        return x, flatten_level(y, self.epsilon)

    def embed(self, u, theta) -> np.ndarray:
        """Points of R^3 (stereographic coordinates for the spherical model)."""
        u, theta = np.broadcast_arrays(np.atleast_1d(np.asarray(u, dtype=float)),
                                       np.asarray(theta, dtype=float))
        e1, e2 = tangent_basis(self.axis)
        xy = np.array([self.model_coordinates(x) for x in u])
        around = np.cos(theta)[:, None] * e1 + np.sin(theta)[:, None] * e2
        if self.profile.kind == "cylindrical":
            return xy[:, :1] * around + xy[:, 1:] * self.axis
        rad = np.exp(xy[:, 1:])
        phi = xy[:, :1]
        return rad * (np.sin(phi) * around + np.cos(phi) * self.axis)

    def chart(self, q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Inverse of ``embed`` up to the profile parameter: ``(phi, ln|q|,
        theta)`` around the axis."""
        q = np.atleast_2d(np.asarray(q, dtype=float))
        e1, e2 = tangent_basis(self.axis)
        n = np.linalg.norm(q, axis=1)
        phi = np.arccos(np.clip(q @ self.axis / n, -1.0, 1.0))
        theta = np.arctan2(q @ e2, q @ e1)
        return phi, np.log(n), theta


def gauss_curvature(surface: RevolutionSurface, s: float, ambient: str | None = None) -> float:
    """Gauss curvature at profile parameter ``s``, optionally in another ambient."""
    if ambient is not None and ambient != surface.ambient:
        surface = replace(surface, ambient=ambient)
    return surface.gauss_curvature(s)


def _fd_weights(half: int, order: int) -> np.ndarray:
    """Central-difference weights on offsets ``-half..half`` (unit step)."""
    k = np.arange(-half, half + 1, dtype=float)
    V = np.vander(k, increasing=True).T
    rhs = np.zeros(len(k))
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def intrinsic_curvature(surface: RevolutionSurface, u: float, h: float = 1e-4,
                        half: int = 4) -> float:
    """Gauss curvature from the coefficients ``E`` and ``G`` alone,
    ``K = -(1/sqrt(E G)) d/du (d/du sqrt(G) / sqrt(E))``, with central
    differences of step ``h`` on ``2 half + 1`` points."""
    vals = np.array([surface.metric(u + d * h)[::2] for d in range(-half, half + 1)])
    e, g = np.sqrt(vals[:, 0]), np.sqrt(vals[:, 1])
    d1 = _fd_weights(half, 1) / h
    d2 = _fd_weights(half, 2) / (h * h)
    g1, g2, e1 = d1 @ g, d2 @ g, d1 @ e
    e0, g0 = e[half], g[half]
    return -(g2 / e0 - g1 * e1 / e0 ** 2) / (e0 * g0)


@dataclass
class Assembly:
    """Two sheets plus one tube per obstacle."""

    table: BilliardTable
    delta: float
    sheet_offset: float
    ambient: str = "spherical"
    epsilon: float = 1.0
    waist_curvature: float | None = None
    tubes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.table.n

    @property
    def genus(self) -> int:
        return self.n - 1

    @property
    def lam0(self) -> float:
        return -math.log(1.0 - self.sheet_offset)

    @property
    def sheet_level(self) -> float:
        """``ln`` of the Euclidean radius of the outer sheet after flattening."""
        return flatten_level(self.lam0, self.epsilon)

    @property
    def inner_level(self) -> float:
        return flatten_level(-self.lam0, self.epsilon)

    @property
    def enlarged_radii(self) -> np.ndarray:
        return self.table.radii + self.delta

    def sheet_factor(self, outer: bool = True) -> float:
        """Conformal factor of a sheet: its metric is ``factor^2`` times the
        round metric of the unit sphere."""
        lam = self.sheet_level if outer else self.inner_level
        if self.ambient == "spherical":
            return 1.0 / math.cosh(lam)
        return math.exp(lam)

    def flatten(self, epsilon: float) -> "Assembly":
        # radial flattenings compose multiplicatively: f_a o f_b = f_(ab)
        if not 0.0 < epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        return self._rebuild(epsilon=self.epsilon * epsilon)

    def with_ambient(self, ambient: str) -> "Assembly":
        return self._rebuild(ambient=ambient)

    def _rebuild(self, **kw) -> "Assembly":
        a = replace(self, tubes=[], **kw)
        a.tubes = [replace(t, ambient=a.ambient, epsilon=a.epsilon) for t in self.tubes]
        return a

    def to_dict(self) -> dict:
        from .tables import table_to_dict

        return {
            "table": table_to_dict(self.table),
            "delta": float(self.delta),
            "sheet_offset": float(self.sheet_offset),
            "ambient": self.ambient,
            "epsilon": float(self.epsilon),
            "waist_curvature": self.waist_curvature,
            "genus": self.genus,
            "tube_parameter_range": [float(t.profile.u_max) for t in self.tubes],
        }


def default_delta(table: BilliardTable) -> float:
    """A quarter of the smallest gap between obstacles, so that the enlarged
    circles keep half of that gap between them."""
    return 0.25 * table.min_gap()


def default_sheet_offset(delta: float) -> float:
    """0.02, reduced if needed so that the collar occupies at most half of the
    annulus of width ``delta``."""
    lam = brentq(lambda x: max_collar_width(x) - 0.5 * delta, 1e-12, 1.0)
    return min(0.02, 1.0 - math.exp(-lam))


def build_sigma(table: BilliardTable, delta: float | None = None,
                sheet_offset: float | None = None,
                waist_curvature: float | None = None,
                ambient: str = "spherical") -> Assembly:
    """Assemble the surface: sheets at radii ``1 - sigma`` and ``1/(1 - sigma)``
    outside the circles of radius ``r_i + delta``, glued by inversion-symmetric
    tubes whose waists are the obstacle boundaries."""
    delta = default_delta(table) if delta is None else float(delta)
    if not delta > 0:
        raise ValueError("delta must be positive")
    if table.n >= 2 and table.min_gap() <= 2.0 * delta:
        raise DeltaTooLarge(
            f"enlarged circles overlap: gap {table.min_gap():.4g} <= 2 delta = {2 * delta:.4g}")
    if np.any(table.radii + delta >= math.pi / 2):
        raise DeltaTooLarge("enlarged radius reaches pi/2")
    sheet_offset = default_sheet_offset(delta) if sheet_offset is None else float(sheet_offset)
    if not 0.0 < sheet_offset < 0.1:
        raise ValueError("sheet_offset must lie in (0, 0.1)")
    lam0 = -math.log(1.0 - sheet_offset)
    asm = Assembly(table, delta, sheet_offset, ambient, 1.0, waist_curvature)
    cache = {}
    for c, r in zip(table.centers, table.radii):
        key = float(r)
        if key not in cache:
            cache[key] = tube_profile(key, delta, lam0, waist_curvature)
        asm.tubes.append(RevolutionSurface(cache[key], np.array(c), ambient, 1.0))
    return asm


def flatten(surface: Assembly, epsilon: float) -> Assembly:
    return surface.flatten(epsilon)


@dataclass
class AssumptionReport:
    transversality: bool
    transversality_worst: float     # smallest angle (rad) between radial line and surface
    vertical_curvature: bool
    vertical_curvature_worst: float  # smallest |II(rho, rho)| at waist points
    symmetry: bool
    symmetry_worst: float           # largest inversion/rotation residual
    worst_points: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.transversality and self.vertical_curvature and self.symmetry

    def to_dict(self) -> dict:
        return {
            "transversality": {"pass": bool(self.transversality),
                               "worst": float(self.transversality_worst)},
            "vertical_curvature": {"pass": bool(self.vertical_curvature),
                                   "worst": float(self.vertical_curvature_worst)},
            "symmetry": {"pass": bool(self.symmetry), "worst": float(self.symmetry_worst)},
            "passed": bool(self.passed),
        }


def _distance_to_profile(profile: ProfileCurve, phi: float, lam: float) -> float:
    """Distance from ``(phi, |lam|)`` to the upper half of the profile: nearest
    node, then Newton steps on ``(P(s) - p) . P'(s) = 0``."""
    p = np.array([phi, abs(lam)])
    d2 = (profile.node_x - p[0]) ** 2 + (profile.node_y - p[1]) ** 2
    s = min(float(np.argmin(d2)) * profile.node_step, profile.u_max)
    for _ in range(8):
        x, y, xp, yp, xpp, ypp = profile.jet(s)
        dx, dy = x - p[0], y - p[1]
        f = dx * xp + dy * yp
        fp = xp * xp + yp * yp + dx * xpp + dy * ypp
        s = min(max(s - f / fp, 0.0), profile.u_max)
    x, y, *_ = profile.jet(s)
    return math.hypot(x - p[0], y - p[1])


def verify_assumptions(asm: Assembly, n_samples: int = 64, seed: int = 0,
                       angle_tol: float = 1e-3, curvature_tol: float = 1e-6,
                       symmetry_tol: float = 1e-9) -> AssumptionReport:
    """Check transversality to the radial lines, nonzero vertical curvature at
    the waists, and inversion/rotation invariance of the tubes.

    Angles are measured in the coordinates ``(ln |q|, phi, theta)``, whose
    metric is conformal to both ambient metrics.
    """
    rng = np.random.default_rng(seed)
    worst_angle, worst_ii, worst_sym = math.inf, math.inf, 0.0
    where = {}
    for i, tube in enumerate(asm.tubes):
        prof = tube.profile
        # (1) away from the waist circle the radial direction is transverse
        for u in np.linspace(0.0, prof.u_max, n_samples + 1)[1:]:
            x, _, xp, yp, *_ = prof.jet(u)
            if abs(x - prof.start[0]) <= 1e-12:
                continue
            angle = math.asin(min(1.0, abs(xp) / math.hypot(xp, yp)))
            if angle < worst_angle:
                worst_angle, where["transversality"] = angle, (i, float(u))
        # (2) at the waist the radial direction is the profile tangent
        kp = abs(tube.principal_curvatures(0.0)[1])
        if kp < worst_ii:
            worst_ii, where["vertical_curvature"] = kp, i
        # (3) inversion and rotation images stay on the tube
        u = rng.uniform(prof.u_min, prof.u_max, n_samples)
        th = rng.uniform(0, 2 * math.pi, n_samples)
        # the assumptions concern the unflattened surface
        q = replace(tube, epsilon=1.0).embed(u, th)
        inv = q / np.sum(q * q, axis=1, keepdims=True)
        rot_angle = rng.uniform(0, 2 * math.pi)
        e1, e2 = tangent_basis(tube.axis)
        k = tube.axis
        rot = (q * math.cos(rot_angle) + np.cross(k, q) * math.sin(rot_angle)
               + np.outer(q @ k, k) * (1 - math.cos(rot_angle)))
        for pts in (inv, rot):
            phi, lam, _ = tube.chart(pts)
            for p, l in zip(phi, lam):
                res = _distance_to_profile(prof, p, l)
                if res > worst_sym:
                    worst_sym, where["symmetry"] = res, i
    if not math.isfinite(worst_angle):
        worst_angle = math.pi / 2
    return AssumptionReport(bool(worst_angle >= angle_tol), worst_angle,
                            bool(worst_ii >= curvature_tol), worst_ii,
                            bool(worst_sym <= symmetry_tol), worst_sym, where)
