"""Riccati and Jacobi evolution along billiard trajectories and geodesics.

Jacobi data ``(j, dj)`` solve ``j'' = -K j``; the Riccati variable is
``u = dj / j`` and solves ``u' = -K - u^2`` away from zeros of ``j``.  Values of
``u`` are kept projectively so that passing through a zero of ``j`` (``u``
infinite) is harmless.  At a collision with a dispersing circular obstacle of
radius ``r`` the slope jumps by ``+2 cot(r) / sin(theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .billiard import (
    DEFAULT_GRAZING_TOL,
    TrajectoryTrace,
    sample_phase_points,
    simulate,
)
from .errors import GrazingJump, InfiniteHorizon, StepUnderflow
from .sphere import BilliardTable


@dataclass(frozen=True)
class RiccatiValue:
    finite: bool
    u: float = 0.0

    @classmethod
    def of(cls, u: float) -> "RiccatiValue":
        return cls(True, float(u)) if math.isfinite(u) else cls(False, 0.0)

    @classmethod
    def infinite(cls) -> "RiccatiValue":
        return cls(False, 0.0)

    def as_float(self) -> float:
        return self.u if self.finite else math.inf

    def jacobi(self) -> "JacobiPair":
        return JacobiPair(1.0, self.u) if self.finite else JacobiPair(0.0, 1.0)


@dataclass(frozen=True)
class JacobiPair:
    j: float
    dj: float

    def __post_init__(self):
        if self.j == 0.0 and self.dj == 0.0:
            raise ValueError("the zero Jacobi field carries no slope")

    def riccati(self) -> RiccatiValue:
        if abs(self.j) <= 1e-15 * abs(self.dj):
            return RiccatiValue.infinite()
        return RiccatiValue(True, self.dj / self.j)

    def scaled(self, lam: float) -> "JacobiPair":
        return JacobiPair(lam * self.j, lam * self.dj)


def _rotate(jp: JacobiPair, t: float) -> JacobiPair:
    c, s = math.cos(t), math.sin(t)
    return JacobiPair(c * jp.j + s * jp.dj, -s * jp.j + c * jp.dj)


def free_flight_riccati(u0: RiccatiValue, t: float) -> RiccatiValue:
    """Riccati flow for curvature 1: ``u(t) = tan(arctan(u0) - t)``."""
    if t < 0:
        raise ValueError("free flight time must be nonnegative")
    return _rotate(u0.jacobi(), t).riccati()


def collision_jump(u_minus: RiccatiValue, kappa_mag: float, sin_theta: float,
                   grazing_tol: float = DEFAULT_GRAZING_TOL) -> RiccatiValue:
    if sin_theta < grazing_tol:
        raise GrazingJump(f"sin(theta) = {sin_theta:.3g} below {grazing_tol:g}")
    if not u_minus.finite:
        return u_minus
    return RiccatiValue(True, u_minus.u + 2.0 * kappa_mag / sin_theta)


@dataclass
class RiccatiPath:
    """Piecewise Riccati solution along a billiard trace."""

    t0: float
    u0: RiccatiValue
    times: list = field(default_factory=list)       # collision times after t0
    u_minus: list = field(default_factory=list)
    u_plus: list = field(default_factory=list)
    blowups: list = field(default_factory=list)     # zeros of j between collisions

    def value(self, t: float) -> RiccatiValue:
        """``u(t+)``: right limit at collision times."""
        start, u = self.t0, self.u0
        for tk, up in zip(self.times, self.u_plus):
            if tk > t:
                break
            start, u = tk, up
        return free_flight_riccati(u, t - start)

    def to_csv(self, path, t_end: float, n: int = 2000) -> None:
        """Sampled trace with columns ``t, j, dj, u_finite, u``; ``(j, dj)`` is
        the unit representative of the projective value."""
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "j", "dj", "u_finite", "u"])
            for t in np.linspace(self.t0, t_end, n):
                v = self.value(float(t))
                jp = v.jacobi()
                nrm = math.hypot(jp.j, jp.dj)
                w.writerow([repr(float(t)), repr(jp.j / nrm), repr(jp.dj / nrm),
                            int(v.finite), repr(v.u) if v.finite else "inf"])


def _flight_blowups(u: RiccatiValue, t_start: float, dt: float) -> list[float]:
    # j(t) = cos(t) j0 + sin(t) dj0 vanishes when t = atan2(j0, -dj0) mod pi
    jp = u.jacobi()
    t1 = math.atan2(jp.j, -jp.dj) % math.pi
    out = []
    while t1 <= dt:
        if t1 > 0.0:
            out.append(t_start + t1)
        t1 += math.pi
    return out


def billiard_riccati_trace(trace: TrajectoryTrace, table: BilliardTable, t0: float,
                           u0: RiccatiValue, t_end: float | None = None) -> RiccatiPath:
    """Compose free flights and collision jumps from ``u(t0+) = u0``."""
    t_end = trace.total_time if t_end is None else t_end
    path = RiccatiPath(t0, u0)
    kappa = 1.0 / np.tan(table.radii)
    t, u = t0, u0
    for e in trace.events:
        if e.time <= t0:
            continue
        if e.time > t_end:
            break
        path.blowups.extend(_flight_blowups(u, t, e.time - t))
        um = free_flight_riccati(u, e.time - t)
        up = collision_jump(um, kappa[e.obstacle_index], e.incidence_sin)
        path.times.append(e.time)
        path.u_minus.append(um)
        path.u_plus.append(up)
        t, u = e.time, up
    path.blowups.extend(_flight_blowups(u, t, t_end - t))
    return path


@dataclass
class AnalyticVerdict:
    certified: bool
    lhs: float           # 2 tan(pi/2 - A)
    rhs: float           # tan(H)
    sum_condition: bool  # A + H < pi/2
    m: float             # 2 tan(pi/2 - A) - tan(H)


def analytic_certificate(A: float, H: float, unbounded: bool = False) -> AnalyticVerdict:
    """Hyperbolicity test from the maximal obstacle radius ``A`` and horizon ``H``."""
    if unbounded or not math.isfinite(H):
        raise InfiniteHorizon("a free great circle exists; no finite horizon")
    lhs = 2.0 / math.tan(A)
    rhs = math.tan(H) if H < math.pi / 2 else math.inf
    ok = H < math.pi / 2 and lhs > rhs
    return AnalyticVerdict(ok, lhs, rhs, A + H < math.pi / 2, lhs - rhs)


@dataclass
class CertificateReport:
    verdict: str  # "certified" | "counterexample" | "inconclusive"
    m: float
    c: float
    C: float
    A_bound: float
    samples: int
    used: int = 0
    steps_checked: int = 0
    worst_margin: float = math.inf
    seed: int | None = None
    witness: object = None
    witness_step: int | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else float(x)

        return {
            "verdict": self.verdict,
            "constants": {"m": self.m, "c": self.c, "C": self.C, "A_bound": self.A_bound},
            "samples": self.samples,
            "used": self.used,
            "steps_checked": self.steps_checked,
            "worst_margin": num(self.worst_margin),
            "seed": self.seed,
            "witness_step": self.witness_step,
            "reason": self.reason,
        }


def check_billiard_orbit(trace: TrajectoryTrace, table: BilliardTable, m: float,
                         c: float, C: float, A_bound: float):
    """Check the Riccati cone conditions along one trace.

    The times ``t_k`` are the collision times.  Each step restarts ``u = 0`` at
    ``t_k+`` and requires ``c <= t_{k+1} - t_k <= C``, ``u >= -A_bound`` on the
    flight and ``u(t_{k+1}+) > m``.  Returns ``(n_steps, worst_margin,
    first_failing_step)``; the margin is ``u(t_{k+1}+) - m``.
    """
    kappa = 1.0 / np.tan(table.radii)
    times = trace.collision_times
    worst, fail, n = math.inf, None, 0
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        ev = trace.events[k + 1]
        n += 1
        if dt >= math.pi / 2:
            margin = -math.inf
        else:
            u_minus = -math.tan(dt)
            margin = u_minus + 2.0 * kappa[ev.obstacle_index] / ev.incidence_sin - m
            if u_minus < -A_bound or not (c <= dt <= C):
                margin = -math.inf
        worst = min(worst, margin)
        if fail is None and not margin > 0.0:
            fail = k
    # the open flight after the last collision must still end within C
    last = times[-1] if len(times) else 0.0
    if trace.total_time - last > C and not trace.grazed:
        n += 1
        worst = -math.inf
        if fail is None:
            fail = len(times) - 1
    return n, worst, fail


def sampled_certificate(table: BilliardTable, n_samples: int, t_horizon: float,
                        m: float, c: float, C: float, A_bound: float,
                        seed: int = 0, grazing_tol: float = DEFAULT_GRAZING_TOL,
                        workers: int = 1) -> CertificateReport:
    """Empirical check of the billiard cone conditions on sampled orbits."""
    report = CertificateReport("inconclusive", m, c, C, A_bound, n_samples, seed=seed)
    if n_samples <= 0:
        report.reason = "empty sample budget"
        return report
    rng = np.random.default_rng(seed)
    states = sample_phase_points(table, rng, n_samples)
    args = [(table, s, t_horizon, grazing_tol, m, c, C, A_bound) for s in states]
    results = _map(_certify_one, args, workers)
    for trace, (n, worst, fail) in results:
        if trace is None:
            continue
        report.used += 1
        report.steps_checked += n
        report.worst_margin = min(report.worst_margin, worst)
        if fail is not None and report.witness is None:
            report.witness = trace
            report.witness_step = fail
    if report.witness is not None:
        report.verdict = "counterexample"
    elif report.used == 0 or report.steps_checked == 0:
        report.reason = "no usable non-grazing orbits"
    else:
        report.verdict = "certified"
    return report


def _certify_one(args):
    table, s, t_horizon, grazing_tol, m, c, C, A_bound = args
    trace = simulate(table, s, t_horizon, grazing_tol)
    if trace.grazed:
        return None, (0, math.inf, None)
    return trace, check_billiard_orbit(trace, table, m, c, C, A_bound)


def _map(fn, args, workers: int):
    if workers <= 1:
        return [fn(a) for a in args]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))


def surface_riccati_step(jp: JacobiPair, K_of_t, t0: float, t1: float,
                         tol: float = 1e-10) -> JacobiPair:
    """Integrate ``j'' = -K(t) j`` from ``t0`` to ``t1`` with an adaptive
    embedded Runge-Kutta pair."""
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")

    def rhs(t, y):
        return [y[1], -K_of_t(t) * y[0]]

    sol = solve_ivp(rhs, (t0, t1), [jp.j, jp.dj], method="DOP853",
                    rtol=tol, atol=tol * 1e-2)
    if sol.status != 0:
        raise StepUnderflow(sol.message)
    return JacobiPair(float(sol.y[0, -1]), float(sol.y[1, -1]))
