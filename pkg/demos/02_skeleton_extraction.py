"""From surface mesh to adjacency tree, and why the backward growing matters.

A plain forward shortest-path tree splits off toward the second branch tip
far too close to the root (premature branching). Growing the tree by
backward shortest paths from the leaves instead puts the bifurcation where
the tubes actually separate.
"""

import numpy as np

from skelseg import (build_graph, delaunay_interior, extract_tree, forward_spt,
                     generate_fixture, points_in_mesh, select_root)

fx = generate_fixture("y_tube", {"n_faces": 2500}, seed=1)
mesh = fx.mesh
print(f"y_tube: {mesh.n_faces} faces, ground-truth junction {fx.truth.junctions[0]}")

complex_ = delaunay_interior(mesh, seed=1)
print(f"interior tetrahedralization: {complex_.n_cells} cells, "
      f"{complex_.n_interior_faces()} interior faces")

graph = build_graph(complex_)
print(f"adjacency graph: {graph.n_nodes} nodes, {graph.n_links} links, "
      f"{graph.n_components} component(s)")

inside = points_in_mesh(graph.coords, mesh, seed=1)
root = select_root(graph, candidate_mask=inside).node_ids[0]
print(f"automatic root: node {root} at {np.round(graph.coords[root], 3)} "
      "(largest-face heuristic, trunk end)")

spt = forward_spt(graph, root)
tree, trace = extract_tree(graph, root, trace=True)
print(f"forward SPT spans {spt.n_nodes} nodes; "
      f"extracted tree keeps {tree.n_nodes} (subset of the graph)")
skipped = sum(1 for row in trace if row.backward_length == 0 and row.iteration > 1)
print(f"backward concatenations: {len(trace)}, zero-length (skipped): {skipped}")


def bifurcation(t, tips):
    nodes = np.asarray(t.nodes())
    pts = t.coords[nodes]
    pa, pb = (t.path_from_root(int(nodes[np.argmin(np.linalg.norm(pts - tip, axis=1))]))
              for tip in tips)
    k = 0
    while k < min(len(pa), len(pb)) and pa[k] == pb[k]:
        k += 1
    return pa[k - 1]


tips = [fx.truth.centerlines[1][-1], fx.truth.centerlines[2][-1]]
junction = fx.truth.junctions[0]
d_spt = np.linalg.norm(spt.coords[bifurcation(spt, tips)] - junction)
d_tree = np.linalg.norm(tree.coords[bifurcation(tree, tips)] - junction)
print(f"\nbifurcation distance to the true junction:")
print(f"  forward SPT     : {d_spt:.3f}   <- premature branching")
print(f"  backward-grown  : {d_tree:.3f}")
