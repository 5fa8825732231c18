"""Profile curves of tubes of revolution.

A profile is a unit-speed planar curve whose tangent angle ``alpha`` is a
piecewise polynomial in the arclength.  Two coordinate conventions are used:

* ``log_spherical``: ``(x, y) = (phi, lambda)`` where ``phi`` is the spherical
  angle from the tube axis and ``lambda = ln |q|``.  Inversion in the unit
  sphere is ``lambda -> -lambda``, so a mirror-symmetric profile gives an
  inversion-invariant tube, and the waist ``(R, 0)`` lies on the unit sphere.
* ``cylindrical``: ``(x, y) = (r, z)`` in Euclidean space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as kn
from .errors import EpsilonNotSmallEnough, JunctionMismatch

KINDS = {"log_spherical": 0, "cylindrical": 1}
JUNCTION_TOL = 1e-6


@dataclass
class ProfileCurve:
    kind: str
    breaks: np.ndarray
    coef: np.ndarray
    start: tuple
    u_max: float
    mirror: bool
    waist_radius: float
    delta: float
    nodes: int = 512
    node_x: np.ndarray = field(init=False, repr=False)
    node_y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.breaks = np.ascontiguousarray(self.breaks, dtype=float)
        coef = np.zeros((len(self.breaks), 8))
        c = np.asarray(self.coef, dtype=float)
        coef[:, :c.shape[1]] = c
        self.coef = coef
        self.node_step = self.u_max / (self.nodes - 1)
        self.node_x, self.node_y = kn.build_nodes(
            float(self.start[0]), float(self.start[1]), self.node_step,
            self.nodes + 2, self.breaks, self.coef)

    def packed(self, epsilon: float = 1.0, ambient: int = 0):
        prm = np.array([KINDS[self.kind], float(self.mirror), epsilon, ambient,
                        self.start[0], self.start[1], self.node_step, self.nodes + 2])
        return prm, self.breaks, self.coef, self.node_x, self.node_y

    @property
    def u_min(self) -> float:
        return -self.u_max if self.mirror else 0.0

    def jet(self, u: float):
        """``(x, y, x', y', x'', y'')`` at parameter ``u``."""
        return kn.profile_jet(float(u), *self.packed())

    def point(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.array([self.jet(x)[:2] for x in u])
        return out

    def alpha(self, u: float) -> float:
        x, y, xp, yp, *_ = self.jet(u)
        return math.atan2(yp, xp)

    def curvature(self, u: float) -> float:
        """Signed curvature ``d alpha / du``."""
        _, _, xp, yp, xpp, ypp = self.jet(u)
        return xp * ypp - yp * xpp

    def samples(self, n: int = 200) -> np.ndarray:
        return self.point(np.linspace(self.u_min, self.u_max, n))

    # graph description y = h(x) of the upper half, x in [R, R + delta]
    def _param_of(self, x: float) -> float:
        x0 = self.start[0]
        if x <= x0:
            return 0.0
        if x >= self.jet(self.u_max)[0]:
            return self.u_max
        return brentq(lambda a: self.jet(a)[0] - x, 0.0, self.u_max, xtol=1e-15)

    def h(self, x: float) -> float:
        return self.jet(self._param_of(x))[1]

    def dh(self, x: float) -> float:
        a = self._param_of(x)
        return math.tan(self.alpha(a)) if a > 0 else math.inf

    def d2h(self, x: float) -> float:
        a = self._param_of(x)
        if a == 0:
            return math.inf
        return self.curvature(a) / math.cos(self.alpha(a)) ** 3

    def junction_residual(self) -> float:
        """Largest jump of tangent angle or curvature across piece breaks."""
        worst = 0.0
        for k in range(1, len(self.breaks)):
            b = self.breaks[k]
            v = b - self.breaks[k - 1]
            left = np.polynomial.polynomial.polyval(v, self.coef[k - 1])
            dleft = np.polynomial.polynomial.polyval(
                v, np.polynomial.polynomial.polyder(self.coef[k - 1]))
            right = self.coef[k, 0]
            dright = self.coef[k, 1]
            worst = max(worst, abs(left - right), abs(dleft - dright))
        return worst


def _collar_coef(alpha0: float, c: float, ell: float) -> list:
    """Tangent angle with curvature ``-c (1 - S(v/ell))``, ``S`` the quintic
    smoothstep, so the curvature falls from ``-c`` to 0 with two vanishing
    derivatives at both ends."""
    return [alpha0, -c, 0.0, 0.0, 2.5 * c / ell ** 3, -3.0 * c / ell ** 4, c / ell ** 5]


def _rise_and_run(ell0: float, ell1: float, c: float, n: int = 64):
    bp = np.array([0.0, ell0])
    coef = np.zeros((2, 8))
    coef[0, :2] = [math.pi / 2, -c]
    coef[1, :7] = _collar_coef(math.pi / 2 - c * ell0, c, ell1)
    step = (ell0 + ell1) / n
    x, y = kn.build_nodes(0.0, 0.0, step, n + 1, bp, coef)
    return y[-1], x[-1]


def tube_profile(R: float, delta: float, lam0: float,
                 waist_curvature: float | None = None, nodes: int = 512) -> ProfileCurve:
    """Inversion-symmetric tube joining the sheets ``lambda = +-lam0``.

    The profile starts vertically at the waist ``(R, 0)``, follows a circular
    arc of curvature ``waist_curvature`` (in the ``(phi, lambda)`` plane), then a
    collar whose curvature decays to zero, arriving horizontally on the sheet
    ``lambda = lam0``; it continues along the sheet up to ``phi = R + delta``.
    By default the arc and collar have equal lengths.
    """
    if not lam0 > 0:
        raise ValueError("sheet level must be positive")
    if waist_curvature is None:
        A, B = _rise_and_run(1.0, 1.0, math.pi / 3.0)
        ell0 = ell1 = lam0 / A
        c = math.pi / (3.0 * ell0)
    else:
        c = float(waist_curvature)
        if c <= 0:
            raise ValueError("waist curvature must be positive")

        def gap(ell1):
            return _rise_and_run(math.pi / (2 * c) - ell1 / 2, ell1, c)[0] - lam0

        lo, hi = 1e-9 / c, math.pi / c * (1 - 1e-9)
        if gap(lo) > 0 or gap(hi) < 0:
            raise ValueError(f"waist curvature {c:g} cannot reach level {lam0:g}")
        ell1 = brentq(gap, lo, hi, xtol=1e-15)
        ell0 = math.pi / (2 * c) - ell1 / 2
    rise, run = _rise_and_run(ell0, ell1, c)
    if run >= delta:
        raise ValueError(f"collar width {run:.4g} does not fit in delta = {delta:g}")
    end = ell0 + ell1
    breaks = np.array([0.0, ell0, end])
    coef = np.zeros((3, 8))
    coef[0, :2] = [math.pi / 2, -c]
    coef[1, :7] = _collar_coef(math.pi / 2 - c * ell0, c, ell1)
    u_max = end + (delta - run)
    prof = ProfileCurve("log_spherical", breaks, coef, (R, 0.0), u_max, True, R,
                        delta, nodes)
    res = max(prof.junction_residual(), abs(prof.jet(end)[1] - lam0),
              abs(np.polynomial.polynomial.polyval(ell1, coef[1])))
    if res > JUNCTION_TOL:
        raise JunctionMismatch(f"C2 gluing residual {res:.3g}")
    return prof


def max_collar_width(lam0: float) -> float:
    """Width in ``phi`` of the default collar reaching level ``lam0``."""
    A, B = _rise_and_run(1.0, 1.0, math.pi / 3.0)
    return lam0 * B / A


def circular_arc_profile(R: float, curvature: float = 1.0,
                         length: float | None = None) -> ProfileCurve:
    """Symmetric arc through ``(R, 0)`` with vertical tangent there."""
    length = math.pi / (2 * curvature) if length is None else length
    return ProfileCurve("log_spherical", np.array([0.0]), np.array([[math.pi / 2, -curvature]]),
                        (R, 0.0), length, True, R, 0.0, 256)


def euclidean_tube_profile(R: float, delta1: float, delta2: float, rho: float = 1.0,
                           beta: float | None = None) -> ProfileCurve:
    """Tube of a Euclidean surface approximating the billiard near an obstacle of
    spherical radius ``R``.

    In cylindrical coordinates around the obstacle axis, the curve starts on
    the boundary circle ``(sin R, cos R)`` going up (``alpha = pi/2``), turns
    through horizontal to ``alpha(delta2) = -beta`` and then bends down along
    an arc of radius ``rho`` until ``delta1``; curvature is continuous.
    """
    beta = R if beta is None else beta
    sweep = math.pi / 2 + beta
    p1 = delta2 / (rho * sweep)
    coef = np.zeros((2, 8))
    coef[0, :3] = [math.pi / 2, -sweep * (2 - p1) / delta2, -sweep * (p1 - 1) / delta2 ** 2]
    coef[1, :2] = [-beta, -1.0 / rho]
    prof = ProfileCurve("cylindrical", np.array([0.0, delta2]), coef,
                        (math.sin(R), math.cos(R)), delta1, False, R, delta1, 512)
    if prof.junction_residual() > JUNCTION_TOL:
        raise JunctionMismatch(f"C2 gluing residual {prof.junction_residual():.3g}")
    return prof


@dataclass
class FlatteningReport:
    epsilon: float
    m: float
    t_c: float
    statement1: bool
    statement2: bool
    margin1: float   # min over (0, t_c) of k^eps eps^2 / m^4 - 1
    margin2: float   # min over (t_c, m) of k^eps

    @property
    def passed(self) -> bool:
        return self.statement1 and self.statement2

    def to_dict(self) -> dict:
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in self.__dict__.items()} | {"passed": bool(self.passed)}


def flattened_tangent_curvature(profile: ProfileCurve, t: float, epsilon: float):
    """Vertical tangent component and curvature of ``(x, eps y)`` at parameter ``t``.

    Curvature is measured against the normal ``(T_y, -T_x)``, which points
    away from the axis at the waist: ``k^eps = eps k / (ds^eps/dt)^3``.
    """
    _, _, xp, yp, xpp, ypp = profile.jet(t)
    speed = math.hypot(xp, epsilon * yp)
    k1 = yp * xpp - xp * ypp
    return epsilon * yp / speed, epsilon * k1 / speed ** 3


def check_flattening_lemma(profile: ProfileCurve, epsilon: float, m: float,
                           n: int = 4000) -> FlatteningReport:
    """Check the two-regime curvature bound of a flattened symmetric curve.

    ``t_c`` is where the flattened tangent's vertical component falls to ``m``.
    Statement 1: ``T_z >= m`` and ``k^eps >= m^4/eps^2`` on ``(0, t_c)``.
    Statement 2: ``T_z <= m`` and ``k^eps >= 0`` on ``(t_c, m)``.
    """
    if not (0 < epsilon <= 1 and 0 < m < 1):
        raise ValueError("epsilon in (0, 1] and m in (0, 1) required")
    if abs(profile.curvature(0.0)) <= 1e-6:
        raise ValueError("profile curvature at the waist vanishes")
    upper = min(m, profile.u_max)

    def tz(t):
        return flattened_tangent_curvature(profile, t, epsilon)[0] - m

    if tz(upper) >= 0:
        raise EpsilonNotSmallEnough(
            f"flattened tangent stays above m = {m:g} on (0, {upper:g})")
    # first crossing, bracketed on a grid
    grid = np.linspace(0.0, upper, n + 1)
    vals = np.array([tz(t) for t in grid])
    i = int(np.argmax(vals < 0))
    t_c = brentq(tz, grid[i - 1], grid[i], xtol=1e-15)
    bound = m ** 4 / epsilon ** 2
    s1 = np.linspace(0.0, t_c, n + 1)[1:-1]
    s2 = np.linspace(t_c, upper, n + 1)[1:-1]
    d1 = np.array([flattened_tangent_curvature(profile, t, epsilon) for t in s1])
    d2 = np.array([flattened_tangent_curvature(profile, t, epsilon) for t in s2])
    margin1 = float(np.min(d1[:, 1] / bound - 1.0))
    ok1 = bool(np.all(d1[:, 0] >= m) and margin1 > 0)
    if len(d2):
        margin2 = float(np.min(d2[:, 1]))
        ok2 = bool(np.all(d2[:, 0] <= m) and margin2 >= 0)
    else:
        margin2, ok2 = math.inf, True
    return FlatteningReport(epsilon, m, t_c, ok1, ok2,
                            float(margin1), float(margin2))
