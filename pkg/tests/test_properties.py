import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from anosov_lab.billiard import incidence_normal, next_collision, reflect, simulate
from anosov_lab.riccati import JacobiPair, RiccatiValue, collision_jump, free_flight_riccati
from anosov_lab.sphere import TangentState, geodesic_flow, tangent_basis
from anosov_lab.surface import conformal_factor, flatten_level, flatten_points
from anosov_lab.tables import gen_platonic_table, table_from_dict, table_to_dict

SETTINGS = settings(max_examples=60, deadline=None)

finite = st.floats(-1e3, 1e3, allow_nan=False)
times = st.floats(0.0, 3.0, allow_nan=False)
angles = st.floats(0.0, 2 * math.pi, allow_nan=False)
vec3 = st.tuples(*[st.floats(-1.0, 1.0, allow_nan=False)] * 3).map(np.array)

ICO = gen_platonic_table("icosahedron", 0.55)


def state_from(p, a):
    assume(np.linalg.norm(p) > 0.1)
    q = p / np.linalg.norm(p)
    e1, e2 = tangent_basis(q)
    return TangentState.make(q, math.cos(a) * e1 + math.sin(a) * e2)


def free_state(p, a):
    s = state_from(p, a)
    # outside every obstacle, with a margin
    assume(ICO.contains(s.q, tol=-1e-6))
    return s


@SETTINGS
@given(vec3, angles, times, times)
def test_geodesic_flow_is_a_group(p, a, t1, t2):
    s = state_from(p, a)
    x = geodesic_flow(geodesic_flow(s, t1), t2)
    y = geodesic_flow(s, t1 + t2)
    assert np.allclose(x.q, y.q, atol=1e-12) and np.allclose(x.v, y.v, atol=1e-12)


@SETTINGS
@given(vec3, angles, st.floats(0.05, 1.5), st.floats(0.05, 1.5))
def test_billiard_flow_composes(p, a, t1, t2):
    s = free_state(p, a)
    whole = simulate(ICO, s, t1 + t2, grazing_tol=1e-6)
    assume(not whole.grazed)
    first = simulate(ICO, s, t1, grazing_tol=1e-6)
    # a collision exactly at the split time makes the post-state ambiguous
    assume(all(abs(e.time - t1) > 1e-9 for e in whole.events))
    rest = simulate(ICO, first.state_at(t1), t2, grazing_tol=1e-6)
    assume(not rest.grazed)
    a_end, b_end = rest.state_at(t2), whole.state_at(t1 + t2)
    assert np.allclose(a_end.q, b_end.q, atol=1e-8) and np.allclose(a_end.v, b_end.v, atol=1e-8)


@SETTINGS
@given(vec3, angles)
def test_reflection_is_an_involution(p, a):
    s = free_state(p, a)
    ev = next_collision(ICO, s, 2 * math.pi, 1e-6)
    assume(ev is not None and not ev.grazing)
    arrived = TangentState(ev.point, geodesic_flow(s, ev.time).v)
    once = reflect(arrived, ev, ICO)
    twice = reflect(once, ev, ICO)
    assert np.allclose(twice.v, arrived.v, atol=1e-12)
    # the normal component flips, the tangential one is kept
    n = incidence_normal(ev.point, ICO.centers[ev.obstacle_index])
    assert math.isclose(once.v @ n, -(arrived.v @ n), abs_tol=1e-12)
    assert math.isclose(np.linalg.norm(once.v), 1.0, abs_tol=1e-14)


@SETTINGS
@given(finite, finite, st.floats(1e-3, 1e3).flatmap(lambda x: st.sampled_from([x, -x])))
def test_jacobi_pairs_are_projective(j, dj, lam):
    assume(abs(j) > 1e-12 or abs(dj) > 1e-12)
    a, b = JacobiPair(j, dj).riccati(), JacobiPair(j, dj).scaled(lam).riccati()
    assert a.finite == b.finite
    if a.finite:
        assert math.isclose(a.u, b.u, rel_tol=1e-12, abs_tol=1e-12)


@SETTINGS
@given(finite, times, times)
def test_free_flight_composes(u0, t1, t2):
    u = RiccatiValue.of(u0)
    a = free_flight_riccati(free_flight_riccati(u, t1), t2)
    b = free_flight_riccati(u, t1 + t2)
    ja, jb = a.jacobi(), b.jacobi()
    # compare as points of the projective line
    cross = ja.j * jb.dj - ja.dj * jb.j
    assert abs(cross) <= 1e-9 * math.hypot(ja.j, ja.dj) * math.hypot(jb.j, jb.dj)


@SETTINGS
@given(finite, st.floats(0.1, 5.0), st.floats(0.01, 1.0))
def test_collision_jump_is_increasing(u0, kappa, sin_theta):
    u = RiccatiValue.of(u0)
    assert collision_jump(u, kappa, sin_theta).u > u0


@SETTINGS
@given(st.lists(st.tuples(vec3, st.floats(0.01, 1.5)), min_size=1, max_size=6))
def test_table_dict_round_trip(items):
    obstacles = []
    for c, r in items:
        assume(np.linalg.norm(c) > 0.1)
        obstacles.append({"center": list(c / np.linalg.norm(c)), "radius": r})
    try:
        t = table_from_dict({"obstacles": obstacles})
    except Exception:
        assume(False)
    back = table_from_dict(table_to_dict(t))
    # centers are renormalized on construction: equal up to an ulp
    assert np.allclose(back.centers, t.centers, rtol=0, atol=1e-15)
    assert np.array_equal(back.radii, t.radii)


@SETTINGS
@given(vec3, st.floats(1e-4, 1.0), st.floats(1e-4, 1.0))
def test_flattening_composes_and_fixes_sphere(p, a, b):
    assume(np.linalg.norm(p) > 0.1)
    q = 3.0 * p
    assert np.allclose(flatten_points(flatten_points(q, b), a), flatten_points(q, a * b),
                       rtol=1e-12, atol=1e-14)
    s = p / np.linalg.norm(p)
    assert np.allclose(flatten_points(s, a), s, atol=1e-15)
    lam = math.log(np.linalg.norm(q))
    assert math.isclose(flatten_level(lam, a), math.log(np.linalg.norm(flatten_points(q, a))),
                        abs_tol=1e-12)


@SETTINGS
@given(vec3)
def test_conformal_factor_under_inversion(p):
    assume(np.linalg.norm(p) > 0.1)
    q = 2.0 * p
    inv = q / (q @ q)
    # inversion is an isometry of the round metric: xi(inv q) |d inv| = xi(q)
    assert math.isclose(conformal_factor(inv) / (q @ q), conformal_factor(q), rel_tol=1e-12)
