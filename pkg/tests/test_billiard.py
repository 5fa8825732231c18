import math

import numpy as np
import pytest
from scipy.optimize import brentq

from anosov_lab.billiard import (
    incidence_normal,
    mean_free_path_estimate,
    next_collision,
    reflect,
    sample_phase_points,
    simulate,
)
from anosov_lab.errors import ExactlyGrazing, StartsInsideObstacle
from anosov_lab.sphere import SphericalCircle, TangentState, geodesic_flow, validate_table


def table1(c, r):
    return validate_table([SphericalCircle(np.asarray(c, float), r)])


def brute_force_hit(table, s, t_max, step=1e-4):
    """First entry time from a dense scan of the height above each center."""
    t = np.arange(0.0, t_max, step)
    Q = np.outer(np.cos(t), s.q) + np.outer(np.sin(t), s.v)
    g = Q @ table.centers.T - np.cos(table.radii)[None, :]
    best = math.inf
    for i in range(table.n):
        idx = np.nonzero((g[:-1, i] < 0) & (g[1:, i] >= 0))[0]
        if len(idx):
            k = idx[0]
            f = lambda x: (math.cos(x) * s.q + math.sin(x) * s.v) @ table.centers[i] - math.cos(table.radii[i])
            best = min(best, brentq(f, t[k], t[k + 1], xtol=1e-14))
    return best


def test_head_on_example():
    s = TangentState(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]))
    ev = next_collision(table1([1, 0, 0], 0.3), s, 10.0)
    assert ev.time == pytest.approx(math.pi / 2 - 0.3, abs=1e-12)
    assert ev.incidence_sin == pytest.approx(1.0, abs=1e-12)


def test_no_collision_example():
    s = TangentState(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]))
    assert next_collision(table1([0, -1, 0], 0.3), s, 10.0) is None


def test_generic_collision_matches_dense_scan():
    c = np.array([math.sin(0.8), 0.2, math.cos(0.8)])
    t = table1(c, 0.3)
    s = TangentState(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]))
    ev = next_collision(t, s, 10.0)
    assert ev.time == pytest.approx(brute_force_hit(t, s, 10.0), abs=1e-9)


def test_random_collisions_match_dense_scan(ico55, rng):
    for s in sample_phase_points(ico55, rng, 30):
        ev = next_collision(ico55, s, 2 * math.pi)
        assert ev.time == pytest.approx(brute_force_hit(ico55, s, 2 * math.pi), abs=1e-9)
        d = math.acos(np.clip(ev.point @ ico55.centers[ev.obstacle_index], -1, 1))
        assert d == pytest.approx(ico55.radii[ev.obstacle_index], abs=1e-9)


def test_start_inside_rejected():
    s = TangentState(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]))
    with pytest.raises(StartsInsideObstacle):
        next_collision(table1([0, 0, 1], 0.3), s, 1.0)


def test_reflect_head_on_and_grazing():
    t = table1([1, 0, 0], 0.3)
    s = TangentState(np.array([0, 0, 1.0]), np.array([1.0, 0, 0]))
    ev = next_collision(t, s, 10.0)
    arrived = geodesic_flow(s, ev.time)
    out = reflect(TangentState(ev.point, arrived.v), ev, t)
    assert np.allclose(out.v, -arrived.v, atol=1e-12)
    n = incidence_normal(ev.point, t.centers[0])
    tangent = np.cross(ev.point, n)
    with pytest.raises(ExactlyGrazing):
        reflect(TangentState(ev.point, tangent), ev, t)


def test_reflect_matches_householder():
    t = table1([1, 0, 0], 0.3)
    p = np.array([math.cos(0.3), 0.0, math.sin(0.3)])
    n = incidence_normal(p, t.centers[0])
    w = np.cross(p, n)
    v = (-n + w) / math.sqrt(2.0)
    ev = next_collision(t, TangentState(p, v), 1.0) or type("E", (), {"obstacle_index": 0})()
    out = reflect(TangentState(p, v), ev, t)
    H = np.eye(3) - 2.0 * np.outer(n, n)
    assert np.allclose(out.v, H @ v, atol=1e-14)
    assert out.v @ n == pytest.approx(-(v @ n))
    assert out.v @ w == pytest.approx(v @ w)


def test_free_great_circle_has_no_events():
    t = table1([0, 0, 1], 0.4)
    s = TangentState(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    tr = simulate(t, s, 10.0)
    assert tr.events == [] and tr.total_time == 10.0


def test_period_two_orbit():
    t = validate_table([SphericalCircle([0, 0, 1], 0.4), SphericalCircle([0, 0, -1], 0.4)])
    s = TangentState(np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))
    tr = simulate(t, s, 12.0)
    gaps = np.diff(tr.collision_times)
    assert np.allclose(gaps, math.pi - 0.8, atol=1e-12)
    assert [e.obstacle_index for e in tr.events][:4] in ([0, 1, 0, 1], [1, 0, 1, 0])


def test_trace_invariants(ico55, rng):
    for s in sample_phase_points(ico55, rng, 20):
        tr = simulate(ico55, s, 30.0)
        times = tr.collision_times
        assert np.all(np.diff(times) > 0)
        for e, after in zip(tr.events, tr.states_after):
            assert abs(np.linalg.norm(after.v) - 1) <= 1e-10
            d = math.acos(np.clip(e.point @ ico55.centers[e.obstacle_index], -1, 1))
            assert abs(d - ico55.radii[e.obstacle_index]) <= 1e-9
        # sampled arcs stay outside the open obstacles
        starts = np.concatenate([[0.0], times])
        for k, t0 in enumerate(starts[:-1]):
            for t in np.linspace(t0, starts[k + 1], 16)[1:-1]:
                assert ico55.contains(tr.state_at(t).q, tol=1e-8)


def test_time_reversal(ico55, rng):
    # the flow is chaotic, roundoff grows by a sizable factor per bounce;
    # about 20 collisions keep the round trip well inside 1e-7
    for s in sample_phase_points(ico55, rng, 20):
        probe = simulate(ico55, s, 10.0, max_events=20)
        if probe.grazed:
            continue
        times = probe.collision_times
        T = 0.5 * (times[-2] + times[-1])  # end in mid-flight
        tr = simulate(ico55, s, T)
        end = tr.state_at(T)
        back = simulate(ico55, TangentState(end.q, -end.v), T)
        assert len(back.events) == len(tr.events)
        assert np.allclose(back.state_at(T).q, s.q, atol=1e-7)


def test_rotation_equivariance(ico55, rng):
    from scipy.spatial.transform import Rotation

    R = Rotation.random(random_state=7).as_matrix()
    rot = validate_table(SphericalCircle(R @ o.center, o.radius) for o in ico55.obstacles)
    for s in sample_phase_points(ico55, rng, 10):
        a = simulate(ico55, s, 4.0)
        b = simulate(rot, TangentState(R @ s.q, R @ s.v), 4.0)
        n = min(len(a.events), len(b.events))
        assert n > 5
        assert np.allclose(a.collision_times[:n], b.collision_times[:n], atol=1e-9)


def test_grazing_is_flagged():
    t = table1([1, 0, 0], 0.3)
    # aim tangentially: the great circle at distance exactly r from the center
    p = np.array([math.cos(0.3), math.sin(0.3), 0.0])
    start = geodesic_flow(TangentState(p, np.array([0, 0, 1.0])), -1.0)
    tr = simulate(t, TangentState(start.q, start.v), 5.0, grazing_tol=1e-4)
    assert tr.grazed or tr.events == []


def test_mean_free_path_against_monte_carlo(ico55):
    # long orbits: ergodic average of the flight time against the
    # area-over-perimeter formula for the invariant measure
    rng = np.random.default_rng(3)
    flights = []
    for s in sample_phase_points(ico55, rng, 20):
        tr = simulate(ico55, s, 1000.0)
        flights.extend(np.diff(tr.collision_times))
    assert np.mean(flights) == pytest.approx(mean_free_path_estimate(ico55), rel=0.01)


def test_trace_csv(tmp_path, ico55, rng):
    s = sample_phase_points(ico55, rng, 1)[0]
    tr = simulate(ico55, s, 5.0)
    p = tmp_path / "trace.csv"
    tr.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "event_index,time,qx,qy,qz,vx,vy,vz,obstacle,sin_theta"
    assert len(lines) == len(tr.events) + 2
