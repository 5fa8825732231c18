"""Billiard flow on the sphere minus circular obstacles.

Between collisions the particle follows a great circle, so collision times are
found in closed form: along ``q(t) = q cos t + v sin t`` the height above an
obstacle center is ``a cos t + b sin t = rho cos(t - phase)`` and entering the
disk means crossing ``cos r`` upward.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ExactlyGrazing, StartsInsideObstacle
from .sphere import BilliardTable, TangentState, geodesic_flow, unit

TWO_PI = 2.0 * np.pi
MIN_TIME = 1e-12
INSIDE_TOL = 1e-9
DEFAULT_GRAZING_TOL = 1e-4


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    obstacle_index: int
    point: np.ndarray
    incidence_sin: float
    grazing: bool


@dataclass
class TrajectoryTrace:
    initial: TangentState
    events: list = field(default_factory=list)
    states_after: list = field(default_factory=list)
    total_time: float = 0.0

    @property
    def grazed(self) -> bool:
        return bool(self.events) and self.events[-1].grazing

    @property
    def collision_times(self) -> np.ndarray:
        return np.array([e.time for e in self.events])

    def state_at(self, t: float) -> TangentState:
        """Phase point at time ``t`` (post-collision state at a collision time)."""
        s, t0 = self.initial, 0.0
        for e, after in zip(self.events, self.states_after):
            if e.time > t:
                break
            s, t0 = after, e.time
        return geodesic_flow(s, t - t0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["event_index", "time", "qx", "qy", "qz", "vx", "vy", "vz",
                        "obstacle", "sin_theta"])
            s0 = self.initial
            w.writerow([0, 0.0, *s0.q, *s0.v, -1, ""])
            for k, (e, s) in enumerate(zip(self.events, self.states_after), start=1):
                w.writerow([k, repr(e.time), *map(repr, s.q), *map(repr, s.v),
                            e.obstacle_index, repr(e.incidence_sin)])


def _entering_roots(a, b, cos_r, t_max):
    """Smallest t in (MIN_TIME, t_max] where ``a cos t + b sin t`` rises through
    ``cos_r``, for arrays of obstacles.  Returns ``inf`` where there is none."""
    rho = np.hypot(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = cos_r / rho
    hit = ratio < 1.0
    beta = np.arccos(np.clip(ratio, -1.0, 1.0))
    phase = np.arctan2(b, a)
    t = np.mod(phase - beta, TWO_PI)
    t = np.where(t <= MIN_TIME, t + TWO_PI, t)
    return np.where(hit & (t <= t_max), t, np.inf)


def incidence_normal(q, center) -> np.ndarray:
    """Unit normal to the obstacle boundary at ``q``, tangent to the sphere and
    pointing away from the obstacle (into the billiard domain)."""
    n = -center + np.dot(center, q) * q
    return unit(n)


def next_collision(table: BilliardTable, s: TangentState, t_max: float,
                   grazing_tol: float = DEFAULT_GRAZING_TOL):
    """First obstacle hit along the great circle of ``s`` within ``t_max``,
    or ``None``."""
    c = table.centers
    cos_r = np.cos(table.radii)
    a = c @ s.q
    if np.any(a > cos_r + INSIDE_TOL):
        i = int(np.argmax(a - cos_r))
        raise StartsInsideObstacle(f"start point inside obstacle {i}")
    b = c @ s.v
    t = _entering_roots(a, b, cos_r, t_max)
    i = int(np.argmin(t))
    if not np.isfinite(t[i]):
        return None
    ti = float(t[i])
    p = s.q * np.cos(ti) + s.v * np.sin(ti)
    p = p / np.linalg.norm(p)
    v = -s.q * np.sin(ti) + s.v * np.cos(ti)
    n = incidence_normal(p, c[i])
    sin_theta = min(1.0, abs(float(np.dot(v, n))))
    return CollisionEvent(ti, i, p, sin_theta, sin_theta < grazing_tol)


def reflect(s: TangentState, at: CollisionEvent, table: BilliardTable) -> TangentState:
    """Specular reflection of the velocity of ``s`` at the collision point."""
    n = incidence_normal(s.q, table.centers[at.obstacle_index])
    vn = float(np.dot(s.v, n))
    if abs(vn) < 1e-14:
        raise ExactlyGrazing("reflection undefined for a tangential hit")
    return TangentState(s.q, s.v - 2.0 * vn * n).renormalized()


def simulate(table: BilliardTable, s0: TangentState, t_end: float,
             grazing_tol: float = DEFAULT_GRAZING_TOL,
             max_events: int | None = None) -> TrajectoryTrace:
    """Follow the billiard flow from ``s0`` up to time ``t_end``.

    A grazing collision ends the trace (it is recorded with ``grazing=True``);
    the flow is not defined past it.
    """
    trace = TrajectoryTrace(initial=s0)
    s, t = s0, 0.0
    while t < t_end:
        if max_events is not None and len(trace.events) >= max_events:
            break
        horizon = min(t_end - t, TWO_PI)
        ev = next_collision(table, s, horizon, grazing_tol)
        if ev is None:
            # either t_end is reached, or a whole great circle is free and the
            # particle never collides again
            t = t_end
            break
        arrived = geodesic_flow(s, ev.time)
        arrived = TangentState(ev.point, arrived.v)
        tk = t + ev.time
        if ev.grazing:
            ev = CollisionEvent(tk, ev.obstacle_index, ev.point, ev.incidence_sin, True)
            trace.events.append(ev)
            trace.states_after.append(arrived)
            t = tk
            break
        ev = CollisionEvent(tk, ev.obstacle_index, ev.point, ev.incidence_sin, False)
        s = reflect(arrived, ev, table)
        trace.events.append(ev)
        trace.states_after.append(s)
        t = tk
    trace.total_time = t
    return trace


def sample_phase_points(table: BilliardTable, rng: np.random.Generator, n: int):
    """Uniform samples (area on the domain times uniform direction)."""
    from .sphere import random_unit_vectors, tangent_basis

    out = []
    c, r = table.centers, table.radii
    while len(out) < n:
        q = random_unit_vectors(rng, 1)[0]
        if np.any(c @ q >= np.cos(r)):
            continue
        e1, e2 = tangent_basis(q)
        a = rng.uniform(0.0, TWO_PI)
        out.append(TangentState(q, np.cos(a) * e1 + np.sin(a) * e2))
    return out


def mean_free_path_estimate(table: BilliardTable) -> float:
    """Mean time between collisions for the invariant measure:
    ``pi * area(D) / length(boundary)``."""
    r = table.radii
    area = 4.0 * np.pi - np.sum(2.0 * np.pi * (1.0 - np.cos(r)))
    perimeter = np.sum(2.0 * np.pi * np.sin(r))
    return float(np.pi * area / perimeter)
