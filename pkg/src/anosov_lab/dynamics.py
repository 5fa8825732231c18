"""Geodesics and Jacobi fields on assembled surfaces.

On a sheet (a round sphere of conformal factor ``Omega0``) a unit-speed geodesic
is a great circle traversed at angular speed ``1/Omega0`` and Jacobi fields are
rotations, so sheet flights are computed in closed form.  Inside a tube the
state ``(u, theta, du, dtheta, j, dj)`` is integrated by the compiled
Dormand-Prince kernel.  The two descriptions are glued on the circles
``phi = r_i + delta`` where the tube coincides with the sheet.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import _kernels as kn
from .billiard import incidence_normal, next_collision, simulate
from .errors import LeftDomain, NoDelta3, StartsInsideObstacle, StepUnderflow
from .riccati import JacobiPair
from .sphere import BilliardTable, SphericalCircle, TangentState, tangent_basis, unit, validate_table
from .surface import Assembly, RevolutionSurface

MAX_STEPS = 2_000_000
ZERO_BUF = 256


@dataclass
class SurfaceGeodesicState:
    """Unit tangent vector on an assembly.

    ``region`` is ``"outer"`` or ``"inner"`` for the sheets, where ``q`` and
    ``v`` give the point and unit direction on the unit sphere, or the index
    of a tube, where ``s`` is the profile parameter, ``theta`` the rotation
    angle and ``(ps, ptheta)`` the orthonormal velocity components.
    """

    region: object
    s: float = 0.0
    theta: float = 0.0
    ps: float = 0.0
    ptheta: float = 0.0
    q: np.ndarray | None = None
    v: np.ndarray | None = None

    @property
    def on_sheet(self) -> bool:
        return self.region in ("outer", "inner")

    @classmethod
    def sheet(cls, outer: bool, q, v) -> "SurfaceGeodesicState":
        s = TangentState.make(q, v)
        return cls("outer" if outer else "inner", q=s.q, v=s.v)


@dataclass
class ClairautRecord:
    L: float
    drift: float


@dataclass
class TubeVisit:
    tube: int
    t_in: float
    ps_in: float
    L: float
    t_out: float = math.nan
    ps_out: float = math.nan
    drift: float = 0.0
    speed_err: float = 0.0
    steps: int = 0
    exit_outer: bool | None = None

    @property
    def exited(self) -> bool:
        return math.isfinite(self.t_out)


@dataclass
class GeodesicPath:
    t_end: float
    final: SurfaceGeodesicState
    visits: list = field(default_factory=list)
    zeros: list = field(default_factory=list)          # zeros of the Jacobi field
    resets: list = field(default_factory=list)         # (t, j, dj) just before each reset
    jacobi: tuple = (1.0, 0.0)                         # normalized (j, dj) at t_end
    log_scale: float = 0.0                             # log of the dropped normalization
    samples: list = field(default_factory=list)        # rows of the trace CSV

    @property
    def clairaut(self) -> ClairautRecord:
        drift = max((v.drift for v in self.visits), default=0.0)
        L = self.visits[0].L if self.visits else math.nan
        return ClairautRecord(L, drift)

    @property
    def speed_error(self) -> float:
        return max((v.speed_err for v in self.visits), default=0.0)

    @property
    def log_abs_j(self) -> float:
        j = abs(self.jacobi[0])
        return self.log_scale + (math.log(j) if j > 0 else -math.inf)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "s", "theta", "ps", "ptheta", "region", "K", "j", "dj"])
            for row in self.samples:
                w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def enlarged_table(asm: Assembly) -> BilliardTable:
    return validate_table(SphericalCircle(c, r + asm.delta)
                          for c, r in zip(asm.table.centers, asm.table.radii))


class _Walker:
    """Follows one geodesic across sheets and tubes."""

    def __init__(self, asm: Assembly, tol: float, record: bool):
        self.asm = asm
        self.tol = tol
        self.record = record
        self.big = enlarged_table(asm) if asm.n else None
        self.packed = [t.packed() for t in asm.tubes]
        self.zbuf = np.zeros(ZERO_BUF)
        self.nobuf = np.zeros((0, 7))

    # -- conversions between sheet and tube descriptions -------------------
    def to_tube(self, outer: bool, i: int, q, v) -> SurfaceGeodesicState:
        tube = self.asm.tubes[i]
        c = tube.axis
        e1, e2 = tangent_basis(c)
        U = tube.profile.u_max
        phi = math.acos(min(1.0, max(-1.0, float(q @ c))))
        theta = math.atan2(float(q @ e2), float(q @ e1))
        e_phi = incidence_normal(q, c)
        e_th = np.cross(c, q)
        e_th /= np.linalg.norm(e_th)
        a, b = float(v @ e_phi), float(v @ e_th)
        # the profile parameter runs along phi on the outer side, against it inside
        ps = a if outer else -a
        return SurfaceGeodesicState(i, U if outer else -U, theta, ps, b)

    def to_sheet(self, i: int, st: SurfaceGeodesicState) -> SurfaceGeodesicState:
        tube = self.asm.tubes[i]
        c = tube.axis
        e1, e2 = tangent_basis(c)
        outer = st.s > 0
        phi, _ = tube.profile.jet(st.s)[:2]
        around = math.cos(st.theta) * e1 + math.sin(st.theta) * e2
        q = math.sin(phi) * around + math.cos(phi) * c
        e_phi = math.cos(phi) * around - math.sin(phi) * c
        e_th = -math.sin(st.theta) * e1 + math.cos(st.theta) * e2
        a = st.ps if outer else -st.ps
        return SurfaceGeodesicState.sheet(outer, q, a * e_phi + st.ptheta * e_th)

    def tube_vector(self, i: int, st: SurfaceGeodesicState) -> np.ndarray:
        E, _, G, _, _, _, _ = kn.surface_eval(st.s, *self.packed[i])
        return np.array([st.s, st.theta, st.ps / math.sqrt(E), st.ptheta / math.sqrt(G)])

    def tube_state(self, i: int, y) -> SurfaceGeodesicState:
        E, _, G, _, _, _, _ = kn.surface_eval(y[0], *self.packed[i])
        return SurfaceGeodesicState(i, float(y[0]), float(y[1]),
                                    float(math.sqrt(E) * y[2]), float(math.sqrt(G) * y[3]))

    # -- main loop ---------------------------------------------------------
    def run(self, st: SurfaceGeodesicState, t_end: float, jac, reset_times=(),
            reset_exits=()) -> GeodesicPath:
        resets = sorted(reset_times)
        reset_exits = set(reset_exits)
        rk = 0
        j, dj = (0.0, 0.0) if jac is None else (float(jac[0]), float(jac[1]))
        log_scale = 0.0
        path = GeodesicPath(t_end, st)
        t = 0.0
        h0 = 1e-3
        while True:
            if st.on_sheet:
                outer = st.region == "outer"
                om = self.asm.sheet_factor(outer)
                w = 1.0 / om
                if self.record:
                    path.samples.append(self._sheet_row(t, st, om, j, dj))
                ev = None
                if self.big is not None and t < t_end:
                    ev = next_collision(self.big, TangentState(st.q, st.v), (t_end - t) * w, 0.0)
                t_next = t_end if ev is None else t + ev.time * om
                # Jacobi field on the round sheet, with resets inside the flight
                tc = t
                while jac is not None:
                    t_stop = min(t_next, resets[rk]) if rk < len(resets) else t_next
                    j, dj = self._sheet_jacobi(j, dj, w, t_stop - tc, tc, path)
                    tc = t_stop
                    if rk < len(resets) and resets[rk] <= t_next:
                        path.resets.append((resets[rk], j, dj))
                        j, dj = 1.0, 0.0
                        rk += 1
                        continue
                    break
                if ev is None:
                    s = TangentState(st.q, st.v)
                    ang = (t_end - t) * w
                    q = s.q * math.cos(ang) + s.v * math.sin(ang)
                    v = -s.q * math.sin(ang) + s.v * math.cos(ang)
                    st = SurfaceGeodesicState.sheet(outer, q, v)
                    t = t_end
                    break
                v_hit = -st.q * math.sin(ev.time) + st.v * math.cos(ev.time)
                t = t_next
                st = self.to_tube(outer, ev.obstacle_index, ev.point, unit(v_hit))
                path.visits.append(TubeVisit(st.region, t, st.ps, 0.0))
                continue

            i = st.region
            prm, bp, coef, nx, ny = self.packed[i]
            U = self.asm.tubes[i].profile.u_max
            y = np.array([*self.tube_vector(i, st), j, dj], dtype=float)
            if not path.visits or path.visits[-1].exited:
                path.visits.append(TubeVisit(i, t, st.ps, 0.0))
            visit = path.visits[-1]
            E, _, G, _, _, _, _ = kn.surface_eval(y[0], prm, bp, coef, nx, ny)
            visit.L = G * y[3]
            while True:
                t_stop = t_end
                if jac is not None and rk < len(resets) and resets[rk] < t_end:
                    t_stop = resets[rk]
                buf = np.zeros((4096, 7)) if self.record else self.nobuf
                status, t, y, steps, nz, nb, drift, serr, h0 = kn.integrate(
                    y, t, t_stop, -U, U, self.tol, h0, prm, bp, coef, nx, ny,
                    self.zbuf, buf, MAX_STEPS)
                if jac is not None:
                    path.zeros.extend(self.zbuf[:min(nz, ZERO_BUF)].tolist())
                if self.record:
                    for row in buf[:nb]:
                        path.samples.append(self._tube_row(i, row))
                visit.steps += steps
                visit.drift = max(visit.drift, drift)
                visit.speed_err = max(visit.speed_err, serr)
                if status == 3:
                    raise StepUnderflow(f"step size underflow in tube {i} at t = {t:.6g}")
                if status == 4:
                    raise StepUnderflow(f"step budget exhausted in tube {i} at t = {t:.6g}")
                if status == 0 and jac is not None and t_stop < t_end:
                    path.resets.append((t_stop, y[4], y[5]))
                    y[4], y[5] = 1.0, 0.0
                    rk += 1
                    continue
                break
            j, dj = float(y[4]), float(y[5])
            if status == 0:
                st = self.tube_state(i, y)
                break
            st = self.tube_state(i, y)
            visit.t_out = t
            visit.ps_out = st.ps
            visit.exit_outer = status == 1
            if len(path.visits) - 1 in reset_exits and jac is not None:
                path.resets.append((t, j, dj))
                j, dj = 1.0, 0.0
            st = self.to_sheet(i, st)
            if jac is not None:
                nrm = math.hypot(j, dj)
                log_scale += math.log(nrm)
                j, dj = j / nrm, dj / nrm
        if jac is not None:
            nrm = math.hypot(j, dj)
            if nrm > 0:
                log_scale += math.log(nrm)
                j, dj = j / nrm, dj / nrm
        path.final = st
        path.jacobi = (j, dj)
        path.log_scale = log_scale
        path.zeros.sort()
        return path

    @staticmethod
    def _sheet_jacobi(j, dj, w, dt, t0, path):
        if dt <= 0:
            return j, dj
        # j(t) = j cos(wt) + (dj/w) sin(wt) vanishes at w t = atan2(j, -dj/w) mod pi
        first = (math.atan2(j, -dj / w) % math.pi) / w
        period = math.pi / w
        tz = first
        while tz <= dt:
            if tz > 0.0:
                path.zeros.append(t0 + tz)
            tz += period
        c, s = math.cos(w * dt), math.sin(w * dt)
        return j * c + dj / w * s, -j * w * s + dj * c

    def _sheet_row(self, t, st, om, j, dj):
        region = st.region
        return [t, math.nan, math.nan, math.nan, math.nan, region, 1.0 / om ** 2, j, dj]

    def _tube_row(self, i, row):
        E, _, G, _, K, _, _ = kn.surface_eval(row[1], *self.packed[i])
        return [float(row[0]), float(row[1]), float(row[2]), float(math.sqrt(E) * row[3]),
                float(math.sqrt(G) * row[4]), i, float(K), float(row[5]), float(row[6])]


def integrate_geodesic(asm: Assembly, s0: SurfaceGeodesicState, t_end: float,
                       tol: float = 1e-10, record: bool = False) -> GeodesicPath:
    """Follow the geodesic from ``s0`` for time ``t_end``; Clairaut drift and
    unit-speed error are recorded per tube visit."""
    _validate_start(asm, s0)
    return _Walker(asm, tol, record).run(s0, t_end, None)


def jacobi_along(asm: Assembly, s0: SurfaceGeodesicState, t_end: float,
                 j0: JacobiPair = JacobiPair(0.0, 1.0), tol: float = 1e-10,
                 record: bool = False) -> GeodesicPath:
    """Co-integrate the geodesic and the normal Jacobi field ``j'' = -K j``.

    ``path.zeros`` holds the zeros of ``j`` after ``t = 0`` (conjugate times
    when ``j(0) = 0``); ``path.jacobi`` is the normalized final pair and
    ``path.log_scale`` the accumulated log-norm.
    """
    _validate_start(asm, s0)
    path = _Walker(asm, tol, record).run(s0, t_end, (j0.j, j0.dj))
    path.zeros = [z for z in path.zeros if z > 1e-12]
    return path


def _validate_start(asm: Assembly, s0: SurfaceGeodesicState) -> None:
    if s0.on_sheet:
        if asm.n and np.any(asm.table.centers @ s0.q > np.cos(asm.enlarged_radii) + 1e-9):
            raise LeftDomain("sheet start point lies inside a tube region")
        return
    if not 0 <= s0.region < asm.n:
        raise LeftDomain(f"no tube {s0.region}")
    lo, hi = asm.tubes[s0.region].u_range
    if not lo <= s0.s <= hi:
        raise LeftDomain(f"profile parameter {s0.s} outside [{lo}, {hi}]")
    if abs(s0.ps ** 2 + s0.ptheta ** 2 - 1.0) > 1e-8:
        raise ValueError("tube state must have unit speed")


def geodesic_position(asm: Assembly, st: SurfaceGeodesicState) -> np.ndarray:
    """Point of R^3 (model coordinates) of a state."""
    if st.on_sheet:
        lev = asm.sheet_level if st.region == "outer" else asm.inner_level
        return math.exp(lev) * st.q
    return asm.tubes[st.region].embed(st.s, st.theta)[0]


def distance_estimate(asm: Assembly, a: SurfaceGeodesicState, b: SurfaceGeodesicState) -> float:
    """Ambient-metric length of the straight segment between two nearby states
    (midpoint rule); accurate to second order in their separation."""
    pa, pb = geodesic_position(asm, a), geodesic_position(asm, b)
    d = np.linalg.norm(pa - pb)
    if asm.ambient == "spherical":
        mid = 0.5 * (pa + pb)
        return float(d * 2.0 / (1.0 + mid @ mid))
    return float(d)


def random_sheet_states(asm: Assembly, rng: np.random.Generator, n: int) -> list:
    """Uniform points of the sheets outside the tube regions, uniform directions."""
    out = []
    c = asm.table.centers
    cos_big = np.cos(asm.enlarged_radii) if asm.n else np.zeros(0)
    while len(out) < n:
        q = rng.normal(size=3)
        q /= np.linalg.norm(q)
        if asm.n and np.any(c @ q >= cos_big):
            continue
        e1, e2 = tangent_basis(q)
        a = rng.uniform(0, 2 * math.pi)
        outer = bool(rng.integers(2))
        out.append(SurfaceGeodesicState.sheet(outer, q, math.cos(a) * e1 + math.sin(a) * e2))
    return out


# ---------------------------------------------------------------------------
# Conjugate points on Euclidean tubes

@dataclass
class ConjugateReport:
    geodesic_id: str
    first_blowup_time: float | None
    bound_value: float
    integral_value: float
    verdict: str
    exit_time: float = math.nan
    delta3: float = math.nan
    L: float = math.nan
    note: str = ""

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "geodesic_id": self.geodesic_id,
            "first_blowup_time": num(self.first_blowup_time),
            "bound_value": num(self.bound_value),
            "integral_value": num(self.integral_value),
            "verdict": self.verdict,
            "exit_time": num(self.exit_time),
            "delta3": num(self.delta3),
            "L": num(self.L),
            "note": self.note,
        }


def curvature_integral_bound(radius: float, gamma2: float, gamma3: float,
                             rel_gap: float = 1e-6) -> tuple[float, str]:
    """``(1 - cos(radius/2)) / sqrt(gamma2^2 - gamma3^2)`` and a note; when the
    window ``gamma2 / gamma3 - 1`` is below ``rel_gap`` the bound blows up and
    the note is ``"DegenerateWindow"``."""
    if gamma2 <= gamma3 * (1.0 + rel_gap):
        return math.inf, "DegenerateWindow"
    return (1.0 - math.cos(radius / 2.0)) / math.sqrt(gamma2 ** 2 - gamma3 ** 2), ""


def _single_tube(surface: RevolutionSurface) -> Assembly:
    asm = Assembly(BilliardTable((), np.zeros((0, 0))), 0.0, 0.01, surface.ambient,
                   surface.epsilon)
    asm.tubes = [surface]
    return asm


def turning_geodesic(surface: RevolutionSurface, u0: float,
                     j0: JacobiPair = JacobiPair(1.0, 0.0), t_max: float = 10.0,
                     u_lo: float | None = None, tol: float = 1e-11):
    """Geodesic tangent to the rotation circle at ``u0`` (so ``L = sqrt(G(u0))``),
    integrated with a Jacobi field until it leaves the tube.

    Returns ``(exit_time, zeros, final_y)``.
    """
    prm, bp, coef, nx, ny = surface.packed()
    E, _, G, _, _, _, _ = kn.surface_eval(u0, prm, bp, coef, nx, ny)
    y = np.array([u0, 0.0, 0.0, 1.0 / math.sqrt(G), j0.j, j0.dj])
    lo, hi = surface.u_range
    zeros = np.zeros(ZERO_BUF)
    status, t, y, steps, nz, nb, drift, serr, _ = kn.integrate(
        y, 0.0, t_max, lo if u_lo is None else u_lo, hi, tol, 1e-4, prm, bp, coef,
        nx, ny, zeros, np.zeros((0, 7)), MAX_STEPS)
    if status >= 3:
        raise StepUnderflow("turning geodesic integration failed")
    return (t if status in (1, 2) else math.inf), sorted(zeros[:min(nz, ZERO_BUF)]), y


def euclidean_tube_bound(surface: RevolutionSurface, delta2: float,
                         delta3: float | None = None) -> ConjugateReport:
    """Curvature integral along the geodesic tangent to the circle where the
    profile turns horizontal, its lower bound, and the first conjugate time.

    ``surface`` must be a cylindrical tube in Euclidean space starting
    vertically on the obstacle boundary.  ``delta3`` (the parameter where the
    tangent angle vanishes) is located on ``(0, delta2)`` when not given.
    """
    prof = surface.profile
    if prof.kind != "cylindrical":
        raise ValueError("expected a cylindrical Euclidean tube")
    if delta3 is None:
        a0, a2 = prof.alpha(0.0), prof.alpha(delta2)
        if not (a0 > 0.0 > a2):
            raise NoDelta3("the tangent angle does not cross zero before delta2")
        delta3 = brentq(prof.alpha, 0.0, delta2, xtol=1e-15)
    r = prof.waist_radius
    g3 = prof.jet(delta3)[0]
    g2 = prof.jet(delta2)[0]
    bound, note = curvature_integral_bound(r, g2, g3)

    # integral of K dt over [0, t2] as an integral over s, with s = delta3 + w^2
    def integrand(w):
        s = delta3 + w * w
        x = prof.jet(s)[0]
        K = surface.gauss_curvature(s)
        dsdt = math.sqrt(max(1.0 - g3 * g3 / (x * x), 0.0))
        if w == 0.0:
            return 0.0
        return K * 2.0 * w / dsdt

    wmax = math.sqrt(delta2 - delta3)
    brk = [math.sqrt(b - delta3) for b in prof.breaks if delta3 < b < delta2]
    integral = quad(integrand, 0.0, wmax, points=brk or None, epsabs=1e-13,
                    epsrel=1e-12, limit=400)[0]
    if note == "DegenerateWindow":
        note += ": integral check skipped"
    elif integral < bound - 1e-6:
        note = "integral below bound"

    t_exit, zeros, _ = turning_geodesic(surface, delta3, JacobiPair(1.0, 0.0),
                                        u_lo=0.0)
    zeros = [z for z in zeros if z < t_exit]
    first = zeros[0] if zeros else None
    verdict = "conjugate_points_found" if first is not None else "none_within_horizon"
    return ConjugateReport("turning@delta3", first, bound, integral, verdict, t_exit,
                           delta3, g3, note)


def spherical_twin_check(R: float, delta1: float, epsilon: float = 1e-3,
                         window: float | None = None) -> ConjugateReport:
    """Counterpart in the spherical model: the flattened inversion-symmetric
    tube around an obstacle of radius ``R``, followed along the geodesic
    tangent to the circle where the profile becomes horizontal."""
    from .profile import tube_profile
    from .surface import default_sheet_offset

    sigma = default_sheet_offset(delta1)
    prof = tube_profile(R, delta1, -math.log(1.0 - sigma))
    surf = RevolutionSurface(prof, np.array([0.0, 0.0, 1.0]), "spherical", epsilon)
    u0 = float(prof.breaks[-1])
    t_max = 10.0 if window is None else window
    t_exit, zeros, _ = turning_geodesic(surf, u0, JacobiPair(1.0, 0.0), t_max=t_max)
    horizon = min(t_exit, t_max)
    zeros = [z for z in zeros if z < horizon]
    first = zeros[0] if zeros else None
    verdict = "conjugate_points_found" if first is not None else "none_within_horizon"
    return ConjugateReport("spherical-twin", first, math.nan, math.nan, verdict, horizon,
                           u0, math.sqrt(surf.metric(u0)[2]))


# ---------------------------------------------------------------------------
# Hyperbolicity certificate on a flattened assembly

@dataclass
class SurfaceCertificateParams:
    m: float = 0.01
    nu: float = 0.05
    H: float | None = None
    window: float = 40.0
    tol: float = 1e-10

    def validate(self) -> None:
        if not (0 < self.m < self.nu < 1):
            raise ValueError(f"need 0 < m < nu < 1, got m = {self.m}, nu = {self.nu}")
        if self.window <= 0:
            raise ValueError("window must be positive")


def certificate_times(visits: list, H: float, nu: float, m: float, t_end: float):
    """Times ``t_k`` for the cone test: exits of tubes that are not almost
    avoided (type A, given as visit indices) padded with type-B times at
    spacing ``H + 2 nu``.  A type-A exit falling within ``nu`` of a pending
    type-B time replaces it.

    Returns a list of ``(time, kind, visit_index)``.
    """
    exits = []
    for k, v in enumerate(visits):
        if not v.exited:
            continue
        avoided = abs(v.ps_in) <= m and v.t_out - v.t_in <= m
        if not avoided:
            exits.append((v.t_out, k))
    if not exits:
        return []
    seq = [(exits[0][0], "A", exits[0][1])]
    idx = 1
    while True:
        last = seq[-1][0]
        nxt = exits[idx] if idx < len(exits) else None
        if nxt is not None and nxt[0] <= last + H + 3 * nu:
            if seq[-1][1] == "B" and nxt[0] < last + nu:
                seq.pop()
            seq.append((nxt[0], "A", nxt[1]))
            idx += 1
            continue
        tb = last + H + 2 * nu
        if tb > t_end:
            break
        if nxt is not None and nxt[0] < tb + nu:
            seq.append((nxt[0], "A", nxt[1]))
            idx += 1
        else:
            seq.append((tb, "B", None))
    return seq


def _certify_surface_one(args):
    asm, st, p = args
    walker = _Walker(asm, p.tol, False)
    try:
        first = walker.run(st, p.window, (1.0, 0.0))
        seq = certificate_times(first.visits, p.H, p.nu, p.m, p.window)
        if len(seq) < 2:
            return None
        exits = [k for _, kind, k in seq if kind == "A"]
        times = [t for t, kind, _ in seq if kind == "B"]
        second = walker.run(st, seq[-1][0] + 1e-9, (1.0, 0.0), reset_times=times,
                            reset_exits=exits)
    except (StepUnderflow, StartsInsideObstacle, LeftDomain):
        return None
    # resets are in time order; the first is t_0, each later one closes a step
    rs = second.resets
    worst, fail, steps = math.inf, None, 0
    spacing_ok = True
    for k in range(1, len(rs)):
        t0, t1 = rs[k - 1][0], rs[k][0]
        j, dj = rs[k][1], rs[k][2]
        blown = any(t0 < z <= t1 for z in second.zeros)
        u = dj / j if j != 0 else -math.inf
        margin = -math.inf if blown else u - p.m
        if not (p.nu - 1e-9 <= t1 - t0 <= p.H + 3 * p.nu + 1e-9):
            spacing_ok = False
        steps += 1
        if margin < worst:
            worst = margin
        if fail is None and not margin > 0:
            fail = k
    return steps, worst, fail, spacing_ok


def anosov_certificate(asm: Assembly, n_samples: int, m: float = 0.01, nu: float = 0.05,
                       window: float = 40.0, H: float | None = None, seed: int = 0,
                       workers: int = 1, tol: float = 1e-10):
    """Sampled cone test for the geodesic flow of a flattened assembly.

    For each sampled unit vector the geodesic is followed for ``window``; the
    Riccati solution restarted from 0 at every ``t_k`` must stay finite and
    exceed ``m`` at ``t_(k+1)``.
    """
    from .horizon import horizon as horizon_of
    from .riccati import CertificateReport, _map

    p = SurfaceCertificateParams(m, nu, H, window, tol)
    p.validate()
    if p.H is None:
        p.H = horizon_of(asm.table).H
    rng = np.random.default_rng(seed)
    states = random_sheet_states(asm, rng, n_samples)
    report = CertificateReport("inconclusive", m, nu, p.H + 3 * nu, math.nan, n_samples,
                               seed=seed)
    results = _map(_certify_surface_one, [(asm, s, p) for s in states], workers)
    spacing_bad = 0
    for k, res in enumerate(results):
        if res is None:
            continue
        steps, worst, fail, spacing_ok = res
        if steps == 0:
            continue
        report.used += 1
        report.steps_checked += steps
        report.worst_margin = min(report.worst_margin, worst)
        spacing_bad += not spacing_ok
        if fail is not None and report.witness is None:
            report.witness = k
            report.witness_step = fail
    if report.witness is not None:
        report.verdict = "counterexample"
    elif report.used == 0:
        report.reason = "no usable orbits"
    else:
        report.verdict = "certified"
    if spacing_bad:
        report.reason = (report.reason + f"; {spacing_bad} orbits with spacing outside "
                         "[nu, H + 3 nu]").lstrip("; ")
    return report


# ---------------------------------------------------------------------------
# Lyapunov estimates

def billiard_lyapunov(table: BilliardTable, s0: TangentState, t_end: float) -> float:
    """``log|j(t_end)| / t_end`` for ``j(0) = 1, j'(0) = 0`` along the billiard
    orbit, composing rotations and collision kicks ``j' += 2 kappa j / sin``."""
    trace = simulate(table, s0, t_end)
    if trace.grazed:
        raise StepUnderflow("orbit grazes an obstacle before t_end")
    kappa = 1.0 / np.tan(table.radii)
    j, dj, log_scale, t = 1.0, 0.0, 0.0, 0.0
    for e in trace.events:
        dt = e.time - t
        c, s = math.cos(dt), math.sin(dt)
        j, dj = c * j + s * dj, -s * j + c * dj
        dj += 2.0 * kappa[e.obstacle_index] / e.incidence_sin * j
        nrm = math.hypot(j, dj)
        log_scale += math.log(nrm)
        j, dj, t = j / nrm, dj / nrm, e.time
    dt = t_end - t
    j = math.cos(dt) * j + math.sin(dt) * dj
    return (log_scale + math.log(abs(j))) / t_end if j != 0 else -math.inf


def lyapunov_estimate(obj, s0, t_end: float, tol: float = 1e-10) -> float:
    """``log|j(t_end)| / t_end`` for the Jacobi field with ``j(0) = 1, j'(0) = 0``,
    on a billiard table or an assembled surface."""
    if isinstance(obj, BilliardTable):
        return billiard_lyapunov(obj, s0, t_end)
    path = jacobi_along(obj, s0, t_end, JacobiPair(1.0, 0.0), tol)
    return path.log_abs_j / t_end
