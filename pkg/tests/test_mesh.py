import csv
import math

import numpy as np
import pytest

from anosov_lab.mesh import (edge_counts, export_mesh, gauss_bonnet_integral, is_closed_oriented,
                             triangle_areas)
from anosov_lab.surface import build_sigma


@pytest.fixture(scope="module")
def asm2(two_table):
    return build_sigma(two_table)


@pytest.fixture(scope="module")
def asm3(three_table):
    return build_sigma(three_table)


def test_closed_oriented_helpers():
    tet = np.array([[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]])
    assert is_closed_oriented(tet)
    assert all(c == 2 for c in edge_counts(tet).values())
    flipped = tet.copy()
    flipped[0] = flipped[0][[0, 2, 1]]
    assert not is_closed_oriented(flipped)
    assert not is_closed_oriented(tet[:3])


@pytest.mark.parametrize("which, chi", [("asm2", 0), ("asm3", -2)])
def test_mesh_is_closed_with_right_euler_characteristic(which, chi, request):
    asm = request.getfixturevalue(which)
    mesh = export_mesh(asm, resolution=16)
    assert is_closed_oriented(mesh.triangles)
    assert mesh.euler_characteristic == chi == 2 - 2 * mesh.genus
    assert len(mesh.curvature) == len(mesh.vertices)


def test_icosahedral_mesh_genus_eleven(ico55):
    asm = build_sigma(ico55, delta=0.003)
    mesh = export_mesh(asm, resolution=12)
    assert mesh.genus == 11
    assert mesh.euler_characteristic == -20
    assert is_closed_oriented(mesh.triangles)


def test_flattened_mesh_stays_closed(asm3):
    mesh = export_mesh(asm3.flatten(1e-3), resolution=16)
    assert is_closed_oriented(mesh.triangles)
    assert mesh.euler_characteristic == -2


def test_resolution_floor(asm2):
    with pytest.raises(ValueError):
        export_mesh(asm2, resolution=4)


def test_gauss_bonnet_coarse(asm3):
    # a coarse mesh already lands within a few percent of 2 pi chi
    mesh = export_mesh(asm3, resolution=64)
    total = gauss_bonnet_integral(asm3, mesh)
    assert total == pytest.approx(-4 * math.pi, rel=0.03)


def test_sheet_level_area_matches_sphere(asm2):
    # spherical model: the outer sheet is a round sphere of radius sheet_factor;
    # beyond the collar each tube runs on the sheet level too, so the surface
    # at that level is the sphere minus caps of the collar radius
    mesh = export_mesh(asm2, resolution=64)
    area = triangle_areas(asm2, mesh)
    r = np.linalg.norm(mesh.vertices[mesh.triangles], axis=2)
    outer = np.all(np.isclose(r, math.exp(asm2.sheet_level), rtol=1e-12), axis=1)
    prof = asm2.tubes[0].profile
    phi_c = prof.jet(prof.breaks[-1])[0]
    expected = asm2.sheet_factor(True) ** 2 * (4 * math.pi - 2 * 2 * math.pi * (1 - math.cos(phi_c)))
    assert area[outer].sum() == pytest.approx(expected, rel=5e-3)


def test_obj_and_curvature_sidecar(asm2, tmp_path):
    out = tmp_path / "surface.obj"
    mesh = export_mesh(asm2, resolution=8, path=out)
    lines = out.read_text().splitlines()
    v = [ln for ln in lines if ln.startswith("v ")]
    f = [ln for ln in lines if ln.startswith("f ")]
    assert len(v) == len(mesh.vertices) and len(f) == len(mesh.triangles)
    idx = np.array([[int(x) for x in ln.split()[1:]] for ln in f])
    assert idx.min() == 1 and idx.max() == len(mesh.vertices)
    assert np.allclose([float(x) for x in v[5].split()[1:]], mesh.vertices[5])
    rows = list(csv.reader(open(tmp_path / "surface.K.csv")))
    assert rows[0] == ["vertex", "K"]
    assert len(rows) == len(mesh.vertices) + 1
    assert float(rows[1][1]) == mesh.curvature[0]
