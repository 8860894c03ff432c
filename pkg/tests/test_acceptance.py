"""Acceptance gate: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Criteria marked with runtime limits assert them.
"""

import time

import numpy as np
import pytest

from skelseg import fixtures
from skelseg.delaunay import delaunay_interior
from skelseg.geometry import BucketGrid, points_in_mesh
from skelseg.mesh_io import ValidationError, validate_surface
from skelseg.pipeline import (PipelineConfig, bench_scaling,
                              canonical_bundle_json, decode_array, run_pipeline)
from skelseg.refinement import (classify_inside, discrete_curvature,
                                remove_outrageous, shave_hairs)
from skelseg.skeleton_graph import build_graph, select_root
from skelseg.tree_extraction import extract_tree, forward_spt
from tree_helpers import inject_hairs, tree_from_polylines


def verdict(name):
    print(f"\n[ACCEPTANCE] {name}: PASS")


@pytest.fixture(scope="module")
def fixture_meshes():
    return {
        "cylinder": fixtures.make_cylinder(n_faces=2000),
        "y_tube": fixtures.make_y_tube(n_faces=2500, seed=1),
        "three_level_tree": fixtures.make_three_level_tree(n_faces=3000, seed=2),
        "box": fixtures.make_box(),
    }


@pytest.fixture(scope="module")
def seeded_y_tubes():
    out = []
    for seed in range(10):
        fx = fixtures.make_y_tube(n_faces=2200, noise=0.04, seed=seed)
        cx = delaunay_interior(fx.mesh, seed=seed)
        g = build_graph(cx)
        inside = points_in_mesh(g.coords, fx.mesh, seed=seed)
        root = select_root(g, candidate_mask=inside).node_ids[0]
        out.append((fx, g, root))
    return out


def test_topology_gate(fixture_meshes):
    t0 = time.perf_counter()
    for name, fx in fixture_meshes.items():
        mesh = fx.mesh
        assert mesh.euler_characteristic() == 2, name
        e = mesh.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        _, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        assert (counts == 2).all(), name
    # mutations must be rejected with the right diagnostic
    mesh = fixture_meshes["cylinder"].mesh
    with pytest.raises(ValidationError, match="open boundary"):
        validate_surface(mesh.vertices, mesh.faces[:-1])
    flipped = mesh.faces.copy()
    flipped[5] = flipped[5][::-1]
    with pytest.raises(ValidationError, match="orientation"):
        validate_surface(mesh.vertices, flipped)
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"topology gate took {elapsed:.2f}s"
    verdict(f"topology gate ({elapsed:.2f}s < 1s)")


def test_dual_graph_correctness(fixture_meshes):
    t0 = time.perf_counter()
    for name in ("cylinder", "y_tube"):
        mesh = fixture_meshes[name].mesh
        assert mesh.n_vertices <= 5000
        cx = delaunay_interior(mesh, seed=0)
        g = build_graph(cx)
        assert g.n_links == cx.n_interior_faces(), name
        # exhaustive empty-circumsphere check on retained cells
        from skelseg.geometry import tet_circumspheres
        centers, radii, ok = tet_circumspheres(cx.vertices, cx.cells)
        verts = cx.vertices
        for ci in range(cx.n_cells):
            if not ok[ci]:
                continue
            d = np.linalg.norm(verts - centers[ci], axis=1)
            inside = d < radii[ci] * (1 - 1e-9)
            inside[cx.cells[ci]] = False
            assert not inside.any(), (name, ci)
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    verdict(f"dual-graph correctness ({elapsed:.1f}s < 30s)")


def _bifurcation(tree, tips):
    nodes = np.asarray(tree.nodes())
    pts = tree.coords[nodes]
    paths = []
    for tip in tips:
        leaf = int(nodes[np.argmin(np.linalg.norm(pts - tip, axis=1))])
        paths.append(tree.path_from_root(leaf))
    pa, pb = paths
    k = 0
    while k < min(len(pa), len(pb)) and pa[k] == pb[k]:
        k += 1
    return pa[k - 1]


def test_premature_branching_fix(seeded_y_tubes):
    t0 = time.perf_counter()
    wins = 0
    for fx, g, root in seeded_y_tubes:
        tips = [fx.truth.centerlines[1][-1], fx.truth.centerlines[2][-1]]
        junction = fx.truth.junctions[0]
        tree, _ = extract_tree(g, root)
        spt = forward_spt(g, root)
        d_tree = np.linalg.norm(tree.coords[_bifurcation(tree, tips)] - junction)
        d_spt = np.linalg.norm(spt.coords[_bifurcation(spt, tips)] - junction)
        if d_tree < d_spt:
            wins += 1
        mean_link = float(np.mean([tree.link_weight(p, c)
                                   for c, p in tree.parent.items()]))
        assert d_tree <= d_spt + mean_link, "farther by more than one mean link"
    elapsed = time.perf_counter() - t0
    assert wins >= 9, f"extract_tree closer in only {wins}/10 runs"
    assert elapsed < 60.0
    verdict(f"premature-branching fix ({wins}/10 closer, {elapsed:.1f}s < 60s)")


def test_lemma2_monotonicity(seeded_y_tubes, fixture_meshes):
    checked = 0
    for fx, g, root in seeded_y_tubes[:4]:
        tree, rows = extract_tree(g, root, trace=True)
        for row in rows:
            if row.backward_length > 0 or row.iteration == 1:
                assert row.delta > 0.0
                checked += 1
        t1, _ = remove_outrageous(tree, fx.mesh, seed=11)
        _, rep = shave_hairs(t1)
        assert len(rep.delta_seq) > 0
        assert min(rep.delta_seq) > 0.0
        checked += len(rep.delta_seq)
    assert checked > 0
    verdict(f"Lemma 2 monotonicity (all {checked} recorded deltas > 0, strict)")


def test_outrageous_removal_inside_ratio():
    for seed in (0, 1, 2):
        fx = fixtures.make_y_tube(n_faces=2200, noise=0.1 * 0.6, seed=seed)  # 10% of branch radius
        cx = delaunay_interior(fx.mesh, seed=seed)
        g = build_graph(cx)
        inside = points_in_mesh(g.coords, fx.mesh, seed=seed)
        root = select_root(g, candidate_mask=inside).node_ids[0]
        tree, _ = extract_tree(g, root)
        out, _ = remove_outrageous(tree, fx.mesh, seed=seed)
        out.validate()  # connected, acyclic
        grid = BucketGrid(fx.mesh.vertices, fx.mesh.faces)
        status = classify_inside(out, fx.mesh, grid, seed=seed + 100)
        ratio = sum(status.values()) / len(status)
        assert ratio == 1.0, f"inside ratio {ratio}"
    verdict("outrageous-node removal (inside ratio 100%, tree connected)")


def test_hair_shaving_precision_recall():
    fx = fixtures.make_three_level_tree(trunk_length=4.0, level2_length=4.0,
                                        level3_length=7.0, n_faces=1000)
    perfect = 0
    for seed in range(10):
        tree = tree_from_polylines(fx.truth.centerlines, spacing=0.25)
        rng = np.random.default_rng(seed)
        injected = inject_hairs(tree, n_hairs=30, hair_spacing=0.08, rng=rng)
        before = set(tree.nodes())
        shaved, _ = shave_hairs(tree)  # default epsilon = mean delta
        removed = before - set(shaved.nodes())
        tp = len(removed & injected)
        precision = tp / max(len(removed), 1)
        recall = tp / max(len(injected), 1)
        if precision == 1.0 and recall == 1.0:
            perfect += 1
    assert perfect >= 9, f"perfect precision/recall in only {perfect}/10 seeds"
    verdict(f"hair shaving ({perfect}/10 seeds at precision=recall=1.0)")


def test_discrete_curvature_circle():
    for ratio in (0.01, 0.05, 0.1):
        r = 5.0
        l = ratio * r
        ang = l / r
        pts = np.stack([r * np.cos(np.arange(3) * ang),
                        r * np.sin(np.arange(3) * ang),
                        np.zeros(3)], axis=1)
        got = discrete_curvature(pts[0], pts[1], pts[2])
        assert abs(got - ratio) / ratio < 0.01, ratio
    verdict("discrete curvature vs l/r (1% at l/r in {0.01, 0.05, 0.1})")


def test_assignment_optimality_vs_enumeration():
    rng = np.random.default_rng(1234)
    for trial in range(100):
        n_cells = int(rng.integers(1, 13))
        n_nodes = int(rng.integers(1, 5))
        d = rng.integers(0, 100, size=(n_cells, n_nodes)).astype(float)
        greedy = d.argmin(axis=1)  # ties: argmin picks the smaller node id
        greedy_cost = d[np.arange(n_cells), greedy].sum()
        # exhaustive enumeration of all |N|^|C| feasible assignments
        total = np.zeros(n_nodes**n_cells)
        for i in range(n_cells):
            digit = (np.arange(n_nodes**n_cells) // n_nodes**i) % n_nodes
            total += d[i, digit]
        assert greedy_cost == total.min(), trial
    verdict("assignment optimality (100 instances, exact ILP enumeration match)")


def test_conservation(fixture_meshes):
    from skelseg.segmentation import decompose_branches, mass_properties, segment
    fx = fixture_meshes["cylinder"]
    cx = delaunay_interior(fx.mesh, seed=0)
    vol = cx.total_volume()
    assert abs(vol - np.pi * 10.0) / (np.pi * 10.0) < 0.05
    for name in ("cylinder", "y_tube"):
        mesh = fixture_meshes[name].mesh
        c = delaunay_interior(mesh, seed=0)
        g = build_graph(c)
        inside = points_in_mesh(g.coords, mesh, seed=0)
        root = select_root(g, candidate_mask=inside).node_ids[0]
        tree, _ = extract_tree(g, root)
        t1, _ = remove_outrageous(tree, mesh, seed=0)
        t2, _ = shave_hairs(t1)
        axis = decompose_branches(t2)
        seg = segment(c, axis)
        props = mass_properties(seg, axis, surface=mesh)
        total = c.total_volume()
        assert abs(sum(p.volume for p in props) - total) / total < 1e-9, name
    verdict("conservation (branch volumes sum to 1e-9; cylinder volume in 5%)")


def test_obstruction_monotonicity(fixture_meshes):
    from skelseg.segmentation import (decompose_branches, downstream_volumes,
                                      segment)
    for name in ("cylinder", "y_tube", "three_level_tree"):
        mesh = fixture_meshes[name].mesh
        c = delaunay_interior(mesh, seed=3)
        g = build_graph(c)
        inside = points_in_mesh(g.coords, mesh, seed=3)
        root = select_root(g, candidate_mask=inside).node_ids[0]
        tree, _ = extract_tree(g, root)
        t1, _ = remove_outrageous(tree, mesh, seed=3)
        t2, _ = shave_hairs(t1)
        axis = decompose_branches(t2)
        seg = segment(c, axis)
        dv = downstream_volumes(axis, seg)
        for child, parent in axis.trees[0].parent.items():
            assert dv[int(parent)] >= dv[int(child)], name
    verdict("obstruction monotonicity (100% of links on all fixtures)")


def test_scaling_shape():
    t0 = time.perf_counter()
    rows, slopes = bench_scaling((6000, 12000, 24000, 48000), seed=0)
    elapsed = time.perf_counter() - t0
    assert elapsed < 600.0, f"bench took {elapsed:.0f}s"
    assert 0.8 <= slopes["graph_nodes"] <= 1.2, slopes
    assert slopes["segmentation_time"] <= 1.3, slopes
    assert slopes["tree_extraction_time"] >= slopes["segmentation_time"], slopes
    verdict("scaling shape (graph {graph:.2f} in [0.8, 1.2]; seg {seg:.2f} <= 1.3; "
            "extract {ext:.2f} >= seg; {t:.0f}s < 600s)".format(
                graph=slopes["graph_nodes"], seg=slopes["segmentation_time"],
                ext=slopes["tree_extraction_time"], t=elapsed))


def test_determinism_bundles():
    fx = fixtures.make_y_tube(n_faces=1800, seed=4)
    box = fixtures.make_box(size=(8.0, 4.0, 11.0), n_per_axis=5)
    config = PipelineConfig(artery_path="<y>", territory_path="<box>", seed=4)
    a = run_pipeline(config, artery_mesh=fx.mesh, territory_mesh=box.mesh)
    b = run_pipeline(config, artery_mesh=fx.mesh, territory_mesh=box.mesh)
    assert canonical_bundle_json(a) == canonical_bundle_json(b)
    verdict("determinism (canonically identical bundles)")
