"""Refining the adjacency tree into the medial axis.

Three stages, applied in pipeline order: removal of outrageous nodes (nodes
outside the surface), hair shaving (subtrees whose contribution to the tree
distance falls below epsilon), and straightening of bumpy nodes (discrete
curvature thresholds). Every stage works on a private copy and returns the
new tree plus a report entry.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .geometry import BucketGrid, ParityError, point_in_mesh, segment_crossings
from .mesh_io import TriangleMesh
from .tree_extraction import SkeletonTree, leaf_path_queue, replay_deltas


@dataclass
class RefinementReport:
    """Bookkeeping across refinement stages.

    ``stages`` maps stage name to {nodes_before, nodes_after, removed};
    ``epsilon`` and ``delta_seq`` come from the shaving stage;
    ``outside_after_straighten`` counts nodes still outside the surface after
    the last stage (reported, never removed there).
    """

    stages: dict = field(default_factory=dict)
    epsilon: float | None = None
    delta_seq: list = field(default_factory=list)
    outside_after_straighten: int | None = None

    def record(self, stage: str, before: int, after: int) -> None:
        self.stages[stage] = {
            "nodes_before": before,
            "nodes_after": after,
            "removed": before - after,
        }

    def merge(self, other: "RefinementReport") -> "RefinementReport":
        self.stages.update(other.stages)
        if other.epsilon is not None:
            self.epsilon = other.epsilon
        if other.delta_seq:
            self.delta_seq = list(other.delta_seq)
        if other.outside_after_straighten is not None:
            self.outside_after_straighten = other.outside_after_straighten
        return self

    def total_removed(self) -> int:
        return sum(s["removed"] for s in self.stages.values())

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "epsilon": self.epsilon,
            "delta_seq": list(self.delta_seq),
            "outside_after_straighten": self.outside_after_straighten,
        }


def classify_inside(tree: SkeletonTree, mesh: TriangleMesh,
                    grid: BucketGrid | None = None, seed: int = 0) -> dict:
    """Inside/outside status per tree node, propagated along tree links.

    The root's status is established by a direct parity query; every link
    then flips or preserves its far node's status according to the parity of
    link-surface crossings. Links grazing the surface fall back to a direct
    query on the endpoint.
    """
    grid = grid or BucketGrid(mesh.vertices, mesh.faces)
    status = {}
    status[tree.root] = point_in_mesh(tree.coords[tree.root], mesh, grid, seed=seed)
    stack = [tree.root]
    while stack:
        n = stack.pop()
        for c in tree.children.get(n, ()):
            crossings, degenerate = segment_crossings(tree.coords[n], tree.coords[c], grid)
            if degenerate:
                try:
                    status[c] = point_in_mesh(tree.coords[c], mesh, grid, seed=seed + 1 + c)
                except ParityError:
                    status[c] = False  # on-surface nodes count as outside
            else:
                status[c] = status[n] ^ (crossings % 2 == 1)
            stack.append(c)
    return status


def remove_outrageous(tree: SkeletonTree, mesh: TriangleMesh,
                      grid: BucketGrid | None = None, seed: int = 0):
    """Drop tree nodes lying outside the surface; keep the tree connected.

    Outside leaf chains are peeled until the surface is crossed back; any
    outside node that survives because it has inside descendants is spliced
    out (its children reattach to its parent). The root must be inside.
    Returns ``(tree, report)``.
    """
    grid = grid or BucketGrid(mesh.vertices, mesh.faces)
    status = classify_inside(tree, mesh, grid, seed=seed)
    if not status[tree.root]:
        raise ValueError("tree root lies outside the surface mesh")
    out = tree.copy()
    before = out.n_nodes

    # peel outside leaves, cascading to newly exposed ones
    candidates = [n for n in out.nodes() if not status[n]]
    leafish = [n for n in candidates if not out.children.get(n)]
    heapq.heapify(leafish)
    while leafish:
        n = heapq.heappop(leafish)
        if out.children.get(n) or not out.contains(n) or status[n]:
            continue
        p = out.parent.pop(n)
        out.children[p].remove(n)
        out.children.pop(n, None)
        out.depth.pop(n, None)
        if not status[p] and not out.children.get(p) and p != out.root:
            heapq.heappush(leafish, p)

    # splice outside nodes shielded by inside descendants
    for n in sorted(out.nodes()):
        if status[n] or n == out.root or not out.contains(n):
            continue
        p = out.parent.pop(n)
        kids = out.children.pop(n, [])
        out.children[p].remove(n)
        for c in kids:
            out.parent[c] = p
            out.children[p].append(c)
        out.depth.pop(n, None)

    out.recompute_depths()
    report = RefinementReport()
    report.record("outrageous", before, out.n_nodes)
    return out, report


def shave_hairs(tree: SkeletonTree, epsilon: float | None = None):
    """Rebuild the tree from its leaf paths, keeping only significant ones.

    Root-to-leaf paths are replayed in non-increasing length order; path i is
    kept iff its tree-distance reduction delta_i >= epsilon. When ``epsilon``
    is omitted it is set to the mean of all delta_i (measured in a first pass
    over the full sequence, then applied in a second). The longest path is
    always kept so the result is never empty. Returns ``(tree, report)``.
    """
    out = tree.copy()
    out.recompute_depths()
    queue = leaf_path_queue(out)
    report = RefinementReport()
    if not queue:
        report.record("shave", out.n_nodes, out.n_nodes)
        report.epsilon = epsilon if epsilon is not None else 0.0
        return out, report

    paths = [(leaf, path) for leaf, _, path in queue]
    deltas = [d for _, d in replay_deltas(out, paths)]
    if epsilon is None:
        epsilon = float(np.mean(deltas))

    kept_nodes = set()
    for i, ((leaf, path), delta) in enumerate(zip(paths, deltas)):
        if i == 0 or delta >= epsilon:
            kept_nodes.update(path)

    shaved = SkeletonTree(root=out.root, coords=out.coords,
                          weight_floor=out.weight_floor)
    shaved.children[out.root] = []
    # kept paths are prefix-closed, so original parent links remain valid
    stack = [out.root]
    while stack:
        n = stack.pop()
        for c in out.children.get(n, ()):
            if c in kept_nodes:
                shaved.add_edge(n, c)
                stack.append(c)
    shaved.recompute_depths()

    report.record("shave", out.n_nodes, shaved.n_nodes)
    report.epsilon = float(epsilon)
    report.delta_seq = [float(d) for d in deltas]
    return shaved, report


def discrete_curvature(p1, p2, p3) -> float:
    """Norm of the difference of consecutive unit direction vectors.

    For uniform samples on a circle this equals chord/radius, i.e. it tracks
    the curvature 1/r of the underlying curve as the spacing shrinks.
    """
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    d12, d23 = p2 - p1, p3 - p2
    n12, n23 = np.linalg.norm(d12), np.linalg.norm(d23)
    if n12 == 0 or n23 == 0:
        raise ValueError("coincident consecutive points")
    return float(np.linalg.norm(d23 / n23 - d12 / n12))


def straighten_bumpy(tree: SkeletonTree, alpha1: float = 0.5, alpha2: float = 0.5,
                     mesh: TriangleMesh | None = None,
                     grid: BucketGrid | None = None, seed: int = 0):
    """Remove bumpy nodes with a sliding 4-node window along each path.

    In a window (n1, n2, n3, n4), n2 is removed and n1-n3 linked when both
    ||d123|| > alpha1 and | ||d234|| - ||d123|| | > alpha2 hold; after a
    removal the window re-tests from its start. Branch nodes (degree >= 3)
    and the root are never removed; paths shorter than 4 nodes are skipped.
    When ``mesh`` is given, nodes still outside it afterwards are counted in
    the report. Returns ``(tree, report)``.
    """
    out = tree.copy()
    before = out.n_nodes
    for leaf in out.leaves():
        if not out.contains(leaf) or out.children.get(leaf):
            continue  # may have been spliced away or become interior
        path = out.path_from_root(leaf)
        i = 0
        while i + 3 < len(path):
            n1, n2, n3, n4 = path[i:i + 4]
            try:
                d123 = discrete_curvature(out.coords[n1], out.coords[n2], out.coords[n3])
                d234 = discrete_curvature(out.coords[n2], out.coords[n3], out.coords[n4])
            except ValueError:
                # coincident circumcenters: no direction to compare
                i += 1
                continue
            fire = d123 > alpha1 and abs(d234 - d123) > alpha2
            if fire and out.degree(n2) < 3 and n2 != out.root:
                out.parent.pop(n2)
                out.children[n1].remove(n2)
                out.children.pop(n2, None)
                out.parent[n3] = n1
                out.children[n1].append(n3)
                path.pop(i + 1)
                # re-test from the window start: the splice changes d(n1..)
            else:
                i += 1
    out.recompute_depths()
    report = RefinementReport()
    report.record("straighten", before, out.n_nodes)
    if mesh is not None:
        grid = grid or BucketGrid(mesh.vertices, mesh.faces)
        status = classify_inside(out, mesh, grid, seed=seed)
        report.outside_after_straighten = int(sum(1 for v in status.values() if not v))
    return out, report
