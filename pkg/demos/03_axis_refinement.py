"""Refining the adjacency tree into a medial axis, stage by stage.

Three passes: drop nodes outside the surface (keeping the tree connected),
shave hair subtrees whose tree-distance contribution falls below the mean
delta, and straighten bumpy nodes by the discrete-curvature window test.
"""

import numpy as np

from skelseg import (BucketGrid, build_graph, classify_inside,
                     delaunay_interior, discrete_curvature, extract_tree,
                     generate_fixture, points_in_mesh, remove_outrageous,
                     select_root, shave_hairs, straighten_bumpy)

fx = generate_fixture("y_tube", {"n_faces": 2500, "noise": 0.06}, seed=5)
mesh = fx.mesh
complex_ = delaunay_interior(mesh, seed=5)
graph = build_graph(complex_)
inside = points_in_mesh(graph.coords, mesh, seed=5)
root = select_root(graph, candidate_mask=inside).node_ids[0]
tree, _ = extract_tree(graph, root)
print(f"extracted tree: {tree.n_nodes} nodes")

grid = BucketGrid(mesh.vertices, mesh.faces)
t1, rep1 = remove_outrageous(tree, mesh, grid, seed=5)
stage = rep1.stages["outrageous"]
status = classify_inside(t1, mesh, grid, seed=99)
print(f"outrageous removal: -{stage['removed']} nodes, "
      f"inside ratio now {sum(status.values())}/{len(status)}")

t2, rep2 = shave_hairs(t1)
stage = rep2.stages["shave"]
deltas = np.asarray(rep2.delta_seq)
print(f"hair shaving: -{stage['removed']} nodes; "
      f"{len(deltas)} leaf paths, epsilon = mean delta = {rep2.epsilon:.3f}")
print(f"  delta range [{deltas.min():.2e}, {deltas.max():.2e}], all > 0: {(deltas > 0).all()}")

t3, rep3 = straighten_bumpy(t2, mesh=mesh, grid=grid, seed=5)
stage = rep3.stages["straighten"]
print(f"straightening: -{stage['removed']} bumpy nodes "
      f"(alpha1 = alpha2 = 0.5); still outside: {rep3.outside_after_straighten}")

print(f"\nmedial axis: {t3.n_nodes} nodes "
      f"({tree.n_nodes} -> {t1.n_nodes} -> {t2.n_nodes} -> {t3.n_nodes})")

# The window statistic tracks curvature: on a circle of radius r sampled
# every l of arc, ||u23 - u12|| = l / r (up to O((l/r)^2)).
r, l = 5.0, 0.25
ang = l / r
pts = np.stack([r * np.cos(np.arange(3) * ang), r * np.sin(np.arange(3) * ang),
                np.zeros(3)], axis=1)
print(f"\ndiscrete curvature on a circle (r={r}, arc spacing {l}): "
      f"{discrete_curvature(*pts):.5f} vs l/r = {l / r:.5f}")
