import math

import numpy as np
import pytest

from anosov_lab.errors import OverlappingObstacles, RadiusOutOfRange
from anosov_lab.sphere import (
    SphericalCircle,
    TangentState,
    geodesic_flow,
    obstacle_geodesic_curvature,
    random_unit_vectors,
    spherical_distance,
    tangent_basis,
    validate_table,
)
from anosov_lab.tables import (
    ICOSAHEDRON_CRITICAL_RADIUS,
    gen_platonic_table,
    table_from_dict,
    table_to_dict,
)


def random_state(rng):
    q = random_unit_vectors(rng, 1)[0]
    return TangentState.make(q, rng.standard_normal(3))


def test_distance_examples():
    assert spherical_distance([0, 0, 1], [0, 0, -1]) == pytest.approx(math.pi)
    assert spherical_distance([0, 0, 1], [1, 0, 0]) == pytest.approx(math.pi / 2)
    assert spherical_distance([0, 0, 1], [0, 0, 1]) == 0.0


def test_distance_symmetric_and_triangle(rng):
    P = random_unit_vectors(rng, 300)
    for a, b, c in P.reshape(100, 3, 3):
        assert spherical_distance(a, b) == spherical_distance(b, a)
        assert spherical_distance(a, c) <= spherical_distance(a, b) + spherical_distance(b, c) + 1e-12


def test_obstacle_curvature():
    assert obstacle_geodesic_curvature(SphericalCircle([0, 0, 1], math.pi / 4)) == pytest.approx(1.0)
    # cot(0.3) from an independent series-free evaluation: cos/sin
    assert obstacle_geodesic_curvature(SphericalCircle([0, 0, 1], 0.3)) == pytest.approx(3.232728, abs=1e-6)
    k = [obstacle_geodesic_curvature(SphericalCircle([0, 0, 1], r)) for r in (1.0, 1.4, 1.57)]
    assert k[0] > k[1] > k[2] > 0


def test_flow_group_property(rng):
    for _ in range(200):
        s = random_state(rng)
        t1, t2 = rng.uniform(-10, 10, 2)
        a = geodesic_flow(geodesic_flow(s, t1), t2)
        b = geodesic_flow(s, t1 + t2)
        assert np.allclose(a.q, b.q, atol=1e-10) and np.allclose(a.v, b.v, atol=1e-10)


def test_flow_preserves_unit_tangent(rng):
    for _ in range(2000):
        s = geodesic_flow(random_state(rng), rng.uniform(-50, 50))
        assert s.is_valid(1e-12)


def test_tangent_basis_orthonormal(rng):
    for n in random_unit_vectors(rng, 50):
        e1, e2 = tangent_basis(n)
        M = np.array([e1, e2, n])
        assert np.allclose(M @ M.T, np.eye(3), atol=1e-14)
        assert np.allclose(np.cross(e1, e2), n)


def test_validate_examples():
    c1 = np.array([0, 0, 1.0])
    c2 = np.array([math.sin(1.2), 0, math.cos(1.2)])
    assert validate_table([SphericalCircle(c1, 0.5), SphericalCircle(c2, 0.5)]).n == 2
    c3 = np.array([math.sin(0.9), 0, math.cos(0.9)])
    with pytest.raises(OverlappingObstacles):
        validate_table([SphericalCircle(c1, 0.5), SphericalCircle(c3, 0.5)])
    with pytest.raises(RadiusOutOfRange):
        validate_table([SphericalCircle(c1, -0.1)])
    with pytest.raises(RadiusOutOfRange):
        validate_table([SphericalCircle(c1, 1.6)])
    with pytest.raises(ValueError):
        validate_table([])


def test_platonic_tables():
    assert ICOSAHEDRON_CRITICAL_RADIUS == pytest.approx(math.atan(2) / 2)
    assert gen_platonic_table("icosahedron", 0.55).n == 12
    with pytest.raises(OverlappingObstacles):
        gen_platonic_table("icosahedron", 0.554)
    with pytest.raises(OverlappingObstacles):
        gen_platonic_table("icosahedron", 0.56)
    oc = gen_platonic_table("octahedron", 0.7)
    assert oc.n == 6 and oc.max_radius == 0.7
    with pytest.raises(ValueError):
        gen_platonic_table("cube", 0.3)


def test_icosahedron_vertex_separation():
    t = gen_platonic_table("icosahedron", 0.3)
    d = t.distances[~np.eye(12, dtype=bool)]
    # nearest neighbours sit at angle arctan 2
    assert d.min() == pytest.approx(math.atan(2), abs=1e-14)


def test_table_round_trip(ico55):
    back = table_from_dict(table_to_dict(ico55))
    assert np.max(np.abs(back.centers - ico55.centers)) <= 1e-15
    assert np.array_equal(back.radii, ico55.radii)
