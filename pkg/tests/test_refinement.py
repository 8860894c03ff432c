import numpy as np
import pytest

from skelseg import fixtures
from skelseg.delaunay import delaunay_interior
from skelseg.geometry import BucketGrid, points_in_mesh
from skelseg.refinement import (classify_inside, discrete_curvature,
                                remove_outrageous, shave_hairs,
                                straighten_bumpy)
from skelseg.skeleton_graph import build_graph, select_root
from skelseg.tree_extraction import extract_tree
from tree_helpers import inject_hairs, tree_from_links, tree_from_polylines


def circle_points(r, arc_spacing, count, center=(0.0, 0.0, 0.0)):
    ts = np.arange(count) * (arc_spacing / r)
    return np.asarray(center) + np.stack(
        [r * np.cos(ts), r * np.sin(ts), np.zeros(count)], axis=1)


# --- outrageous nodes --------------------------------------------------------

def test_inside_tree_unchanged(cylinder_fixture):
    line = [np.array([[0, 0, 0.5], [0, 0, 9.5]])]
    tree = tree_from_polylines(line, spacing=0.5)
    out, rep = remove_outrageous(tree, cylinder_fixture.mesh, seed=1)
    assert rep.stages["outrageous"]["removed"] == 0
    assert set(out.nodes()) == set(tree.nodes())


def test_displaced_leaf_removed(cylinder_fixture):
    tree = tree_from_polylines([np.array([[0, 0, 0.5], [0, 0, 9.0]])], spacing=0.5)
    leaf = tree.leaves()[0]
    coords = np.asarray(tree.coords).copy()
    coords[leaf] = [3.0, 0.0, 9.0]  # well outside radius 1
    tree.coords = coords
    out, rep = remove_outrageous(tree, cylinder_fixture.mesh, seed=1)
    assert rep.stages["outrageous"]["removed"] == 1
    assert not out.contains(leaf)
    out.validate()


def test_exit_and_reenter_spliced(cylinder_fixture):
    # a mid-path node pushed outside has inside descendants: it must be
    # spliced out, keeping the tree connected and fully inside
    tree = tree_from_polylines([np.array([[0, 0, 0.5], [0, 0, 9.0]])], spacing=0.5)
    victim = tree.path_from_root(tree.leaves()[0])[8]
    coords = np.asarray(tree.coords).copy()
    coords[victim] = [2.5, 0.0, coords[victim][2]]
    tree.coords = coords
    out, rep = remove_outrageous(tree, cylinder_fixture.mesh, seed=1)
    assert not out.contains(victim)
    out.validate()
    status = classify_inside(out, cylinder_fixture.mesh, seed=5)
    assert all(status.values())


def test_outside_root_rejected(cylinder_fixture):
    tree = tree_from_links([[5.0, 5.0, 5.0], [0.0, 0.0, 5.0]], [(0, 1)])
    with pytest.raises(ValueError, match="root lies outside"):
        remove_outrageous(tree, cylinder_fixture.mesh, seed=1)


def test_noisy_y_tube_all_inside_after_removal():
    fx = fixtures.make_y_tube(n_faces=2200, noise=0.06, seed=5)
    cx = delaunay_interior(fx.mesh, seed=5)
    g = build_graph(cx)
    inside = points_in_mesh(g.coords, fx.mesh, seed=5)
    root = select_root(g, candidate_mask=inside).node_ids[0]
    tree, _ = extract_tree(g, root)
    out, _ = remove_outrageous(tree, fx.mesh, seed=5)
    out.validate()
    grid = BucketGrid(fx.mesh.vertices, fx.mesh.faces)
    status = classify_inside(out, fx.mesh, grid, seed=17)
    assert all(status.values())


# --- hair shaving -------------------------------------------------------------

def test_single_path_unchanged_for_small_epsilon():
    tree = tree_from_polylines([np.array([[0, 0, 0], [0, 0, 8.0]])], spacing=0.5)
    out, rep = shave_hairs(tree, epsilon=None)
    assert set(out.nodes()) == set(tree.nodes())
    out2, _ = shave_hairs(tree, epsilon=rep.delta_seq[0])  # eps == delta_1
    assert set(out2.nodes()) == set(tree.nodes())


def test_star_tree_stub_removed():
    # one long path (length 100) + one 2-node stub (delta = 1):
    # delta sequence {100, 1}, mean 50.5, stub dropped
    coords = [[0, 0, 0], [100.0, 0, 0], [0, 1.0, 0]]
    tree = tree_from_links(coords, [(0, 1), (0, 2)])
    out, rep = shave_hairs(tree)
    assert rep.delta_seq == [100.0, 1.0]
    assert np.isclose(rep.epsilon, 50.5)
    assert out.contains(1) and not out.contains(2)


def test_epsilon_zero_is_identity(y_tube_tree):
    out, rep = shave_hairs(y_tube_tree, epsilon=0.0)
    assert set(out.nodes()) == set(y_tube_tree.nodes())
    assert all(d > 0 for d in rep.delta_seq)


def test_delta_sequence_strictly_positive(y_tube_tree):
    _, rep = shave_hairs(y_tube_tree)
    assert len(rep.delta_seq) > 0
    assert min(rep.delta_seq) > 0


def test_injected_hairs_removed_exactly():
    fx = fixtures.make_three_level_tree(trunk_length=4.0, level2_length=4.0,
                                        level3_length=7.0, n_faces=1000)
    for seed in range(4):
        tree = tree_from_polylines(fx.truth.centerlines, spacing=0.25)
        rng = np.random.default_rng(seed)
        injected = inject_hairs(tree, n_hairs=30, hair_spacing=0.08, rng=rng)
        before = set(tree.nodes())
        shaved, _ = shave_hairs(tree)
        removed = before - set(shaved.nodes())
        assert removed == injected
        shaved.validate()


# --- straightening ------------------------------------------------------------

def test_collinear_path_unchanged():
    tree = tree_from_polylines([np.array([[0, 0, 0], [0, 0, 6.0]])], spacing=0.5)
    out, rep = straighten_bumpy(tree)
    assert rep.stages["straighten"]["removed"] == 0


def test_perpendicular_bump_removed():
    # hand-computed window: u12=(1,1)/sqrt(2), u23=(1,-1)/sqrt(2), u34=(1,0)
    # ||d123|| = sqrt(2) > 0.5, | ||d234|| - ||d123|| | = 0.6488 > 0.5
    coords = [[0, 0, 0], [1, 1, 0], [2, 0, 0], [3, 0, 0]]
    tree = tree_from_links(coords, [(0, 1), (1, 2), (2, 3)])
    d123 = discrete_curvature(coords[0], coords[1], coords[2])
    d234 = discrete_curvature(coords[1], coords[2], coords[3])
    assert d123 > 0.5 and abs(d234 - d123) > 0.5  # window really fires
    out, rep = straighten_bumpy(tree)
    assert rep.stages["straighten"]["removed"] == 1
    assert not out.contains(1)
    assert out.parent[2] == 0
    out.validate()


def test_short_paths_skipped():
    coords = [[0, 0, 0], [1, 1, 0], [2, 0, 0]]
    tree = tree_from_links(coords, [(0, 1), (1, 2)])
    out, rep = straighten_bumpy(tree)
    assert rep.stages["straighten"]["removed"] == 0


def test_branch_nodes_protected():
    # n2 of a firing window is a junction: it must survive
    coords = [[0, 0, 0], [1, 1, 0], [2, 0, 0], [3, 0, 0], [1, 2, 0]]
    tree = tree_from_links(coords, [(0, 1), (1, 2), (2, 3), (1, 4)])
    out, _ = straighten_bumpy(tree)
    assert out.contains(1)
    assert out.degree(1) >= 3


def test_circle_samples_no_removal_and_curvature_value():
    r, spacing = 5.0, 0.5  # l/r = 0.1
    pts = circle_points(r, spacing, 30)
    tree = tree_from_links(pts, [(i, i + 1) for i in range(29)])
    out, rep = straighten_bumpy(tree)
    assert rep.stages["straighten"]["removed"] == 0
    for i in range(1, 28):
        d = discrete_curvature(pts[i - 1], pts[i], pts[i + 1])
        assert abs(d - spacing / r) / (spacing / r) < 0.01


def test_straighten_reports_outside_count(cylinder_fixture):
    tree = tree_from_polylines([np.array([[0, 0, 0.5], [0, 0, 9.5]])], spacing=0.5)
    _, rep = straighten_bumpy(tree, mesh=cylinder_fixture.mesh)
    assert rep.outside_after_straighten == 0


# --- discrete curvature --------------------------------------------------------

def test_curvature_collinear_zero():
    assert discrete_curvature([0, 0, 0], [1, 0, 0], [2, 0, 0]) == 0.0


def test_curvature_right_angle():
    got = discrete_curvature([0, 0, 0], [1, 0, 0], [1, 1, 0])
    assert np.isclose(got, np.sqrt(2.0))


def test_curvature_circle_value():
    r, l = 5.0, 0.25
    pts = circle_points(r, l, 3)
    got = discrete_curvature(pts[0], pts[1], pts[2])
    assert abs(got - l / r) / (l / r) < 0.01


def test_curvature_coincident_points_rejected():
    with pytest.raises(ValueError, match="coincident"):
        discrete_curvature([0, 0, 0], [0, 0, 0], [1, 0, 0])


# --- report consistency ---------------------------------------------------------

def test_report_totals_consistent(y_tube_fixture, y_tube_tree):
    tree = y_tube_tree
    initial = tree.n_nodes
    t1, r1 = remove_outrageous(tree, y_tube_fixture.mesh, seed=3)
    t2, r2 = shave_hairs(t1)
    t3, r3 = straighten_bumpy(t2)
    report = r1.merge(r2).merge(r3)
    assert t3.n_nodes == initial - report.total_removed()
