import numpy as np
import pytest

from skelseg import fixtures
from skelseg.delaunay import delaunay_interior
from skelseg.skeleton_graph import build_graph, select_root
from skelseg.tree_extraction import extract_tree


@pytest.fixture(scope="session")
def cylinder_fixture():
    return fixtures.make_cylinder(radius=1.0, length=10.0, n_faces=2000)


@pytest.fixture(scope="session")
def cylinder_complex(cylinder_fixture):
    return delaunay_interior(cylinder_fixture.mesh, seed=0)


@pytest.fixture(scope="session")
def cylinder_graph(cylinder_complex):
    return build_graph(cylinder_complex)


@pytest.fixture(scope="session")
def y_tube_fixture():
    return fixtures.make_y_tube(n_faces=2500, seed=1)


@pytest.fixture(scope="session")
def y_tube_complex(y_tube_fixture):
    return delaunay_interior(y_tube_fixture.mesh, seed=1)


@pytest.fixture(scope="session")
def y_tube_graph(y_tube_complex):
    return build_graph(y_tube_complex)


@pytest.fixture(scope="session")
def y_tube_tree(y_tube_graph):
    root = select_root(y_tube_graph).node_ids[0]
    tree, _ = extract_tree(y_tube_graph, root)
    return tree


@pytest.fixture(scope="session")
def unit_cube_mesh():
    from skelseg.mesh_io import validate_surface

    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                  [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
    f = np.array([[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7],
                  [0, 1, 5], [0, 5, 4], [1, 2, 6], [1, 6, 5],
                  [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7]])
    return validate_surface(v, f, label="cube")
