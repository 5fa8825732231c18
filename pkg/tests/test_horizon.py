import math

import numpy as np
import pytest

from anosov_lab.horizon import (
    circle_frame,
    fibonacci_hemisphere,
    free_arcs_on_circle,
    horizon,
    longest_free_arcs,
)
from anosov_lab.sphere import SphericalCircle, validate_table
from anosov_lab.tables import gen_platonic_table


def dense_longest_run(table, pole, n=100000):
    """Longest free run of a great circle from sampling it at n points."""
    e1, e2 = circle_frame(pole)
    phi = np.arange(n) * (2 * math.pi / n)
    Q = np.outer(np.cos(phi), e1) + np.outer(np.sin(phi), e2)
    free = np.all(Q @ table.centers.T < np.cos(table.radii)[None, :], axis=1)
    if free.all():
        return 2 * math.pi
    k = int(np.argmin(free))
    rolled = np.roll(free, -k)
    best = run = 0
    for f in rolled:
        run = run + 1 if f else 0
        best = max(best, run)
    return best * 2 * math.pi / n


def test_free_arc_single_obstacle_through_circle():
    t = validate_table([SphericalCircle([0, 0, 1.0], 0.3)])
    arcs = free_arcs_on_circle(t, np.array([1.0, 0, 0]))
    assert len(arcs) == 1
    # the circle passes through the center: the blocked arc is the diameter 2r
    assert arcs[0][1] == pytest.approx(2 * math.pi - 0.6, abs=1e-12)
    assert arcs[0][1] == pytest.approx(dense_longest_run(t, np.array([1.0, 0, 0])), abs=1e-4)


def test_free_arc_pole_at_center():
    t = validate_table([SphericalCircle([0, 0, 1.0], 0.3)])
    assert free_arcs_on_circle(t, np.array([0, 0, 1.0])) == [(0.0, 2 * math.pi)]


def test_free_arc_two_symmetric_obstacles():
    t = validate_table([SphericalCircle([1.0, 0, 0], 0.3), SphericalCircle([-1.0, 0, 0], 0.3)])
    arcs = free_arcs_on_circle(t, np.array([0, 0, 1.0]))
    assert len(arcs) == 2
    assert arcs[0][1] == pytest.approx(arcs[1][1], abs=1e-12)
    assert arcs[0][1] == pytest.approx(math.pi - 0.6, abs=1e-12)


def test_vectorized_matches_per_circle(ico55, rng):
    poles = rng.standard_normal((200, 3))
    poles /= np.linalg.norm(poles, axis=1, keepdims=True)
    length, _ = longest_free_arcs(ico55, poles)
    for p, L in zip(poles, length):
        arcs = free_arcs_on_circle(ico55, p)
        assert L == pytest.approx(max(a[1] for a in arcs), abs=1e-12)


def test_fibonacci_points_on_upper_hemisphere():
    P = fibonacci_hemisphere(1000)
    assert np.allclose(np.linalg.norm(P, axis=1), 1.0)
    assert P[:, 2].min() > 0


def test_single_obstacle_unbounded():
    t = validate_table([SphericalCircle([0, 0, 1.0], 0.3)])
    h = horizon(t, grid_n=500)
    assert h.unbounded and math.isinf(h.H)


@pytest.fixture(scope="module")
def h55(ico55):
    return horizon(ico55)


def test_icosahedron_horizon_frozen(h55):
    # frozen from a full grid run (2e4 poles, three refinement rounds)
    assert h55.H == pytest.approx(0.94303, abs=1e-4)
    assert not h55.unbounded


def test_reported_arc_is_free(h55, ico55):
    pts = h55.arc_points(256)
    d = np.arccos(np.clip(pts @ ico55.centers.T, -1, 1))
    assert np.max(ico55.radii[None, :] - d) < 1e-8


def test_reported_arc_matches_dense_sampling(h55, ico55):
    assert dense_longest_run(ico55, h55.pole) == pytest.approx(h55.H, abs=1e-4)


def test_brute_force_grid_does_not_beat_search(h55, ico55):
    length, _ = longest_free_arcs(ico55, fibonacci_hemisphere(200000))
    assert length.max() <= h55.H + 1e-3
    assert abs(length.max() - h55.H) < 0.01


def test_refinement_never_loses(ico55):
    coarse = horizon(ico55, grid_n=2000, refine_iters=0)
    fine = horizon(ico55, grid_n=2000, refine_iters=2)
    assert fine.H >= coarse.H


def test_monotone_in_radius():
    for R in (0.45, 0.5):
        a = horizon(gen_platonic_table("icosahedron", R), grid_n=5000)
        b = horizon(gen_platonic_table("icosahedron", R + 0.01), grid_n=5000)
        assert b.H <= a.H + 1e-9


def test_to_dict_fields(h55):
    d = h55.to_dict()
    assert set(d) >= {"H", "pole", "arc", "unbounded", "grid_n", "refine_iters"}
