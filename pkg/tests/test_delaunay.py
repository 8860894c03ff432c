import numpy as np
import pytest

from skelseg import fixtures
from skelseg.delaunay import (TetrahedralizationError, delaunay_interior,
                              supersample_surface)
from skelseg.geometry import points_in_mesh, tet_circumspheres
from skelseg.mesh_io import validate_surface


def empty_circumsphere_violations(complex_, rtol=1e-9):
    """Oracle: exhaustive check that no vertex is strictly inside any
    retained cell's circumsphere."""
    centers, radii, ok = tet_circumspheres(complex_.vertices, complex_.cells)
    bad = 0
    verts = complex_.vertices
    for ci in range(complex_.n_cells):
        if not ok[ci]:
            continue
        d = np.linalg.norm(verts - centers[ci], axis=1)
        inside = d < radii[ci] * (1 - rtol)
        inside[complex_.cells[ci]] = False
        bad += int(inside.sum())
    return bad


def test_single_tet_from_four_points():
    v = np.array([[0, 0, 0], [2, 0, 0], [0, 2, 0], [0, 0, 2]], dtype=float)
    f = np.array([[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]])
    mesh = validate_surface(v, f)
    cx = delaunay_interior(mesh, seed=0)
    assert cx.n_cells == 1
    assert cx.n_interior_faces() == 0


def test_cube_five_or_six_tets_volume_one(unit_cube_mesh):
    # volume oracle: sum of unsigned signed-tet volumes
    cx = delaunay_interior(unit_cube_mesh, seed=0)
    assert cx.n_cells in (5, 6)
    assert np.isclose(cx.total_volume(), 1.0, rtol=1e-5)
    centroids = cx.vertices[cx.cells].mean(axis=1)
    assert points_in_mesh(centroids, unit_cube_mesh, seed=1).all()


def test_cylinder_volume_and_interior(cylinder_fixture, cylinder_complex):
    cx = cylinder_complex
    vol = cx.total_volume()
    assert abs(vol - np.pi * 1.0**2 * 10.0) / (np.pi * 10.0) < 0.05
    centroids = cx.vertices[cx.cells].mean(axis=1)
    assert points_in_mesh(centroids, cylinder_fixture.mesh, seed=9).all()


def test_empty_circumsphere_property(cylinder_complex, y_tube_complex):
    assert empty_circumsphere_violations(cylinder_complex) == 0
    assert empty_circumsphere_violations(y_tube_complex) == 0


def test_monotone_refinement_with_sampling(cylinder_fixture):
    # denser supersampling must not decrease retained volume ratio
    mesh = cylinder_fixture.mesh
    analytic = cylinder_fixture.truth.analytic_volume
    coarse = delaunay_interior(mesh, sampling=None, seed=0).total_volume() / analytic
    fine = delaunay_interior(mesh, sampling=0.35, seed=0).total_volume() / analytic
    assert fine >= coarse - 1e-12


def test_supersample_points_on_surface(y_tube_fixture):
    mesh = y_tube_fixture.mesh
    pts = supersample_surface(mesh, 0.3)
    assert len(pts) > mesh.n_vertices
    # all original vertices retained
    merged = np.unique(np.vstack([pts, mesh.vertices]), axis=0)
    assert len(merged) == len(pts)


def test_degenerate_point_set_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    f = np.array([[0, 1, 2], [0, 2, 3], [0, 2, 1], [0, 3, 2]])
    # a flat "pillow" is not a valid closed manifold; bypass validation and
    # call qhull directly through the module entry
    from skelseg.mesh_io import TriangleMesh
    mesh = TriangleMesh(v, f[:2])
    with pytest.raises(TetrahedralizationError, match="degenerate"):
        delaunay_interior(mesh, seed=0)


def test_adjacency_restricted_to_retained(y_tube_complex):
    cx = y_tube_complex
    pairs = cx.adjacency_pairs()
    assert pairs.min() >= 0 and pairs.max() < cx.n_cells
    # adjacency is mutual
    adj = cx.cell_adjacency
    for c in range(0, cx.n_cells, 97):
        for n in adj[c]:
            if n >= 0:
                assert c in adj[n]


def test_determinism(y_tube_fixture):
    a = delaunay_interior(y_tube_fixture.mesh, seed=5)
    b = delaunay_interior(y_tube_fixture.mesh, seed=5)
    assert np.array_equal(a.cells, b.cells)
    assert np.array_equal(a.cell_adjacency, b.cell_adjacency)
