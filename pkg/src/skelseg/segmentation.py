"""Skeleton-node territories: assignment, branches, mass properties, queries.

Every tetrahedral cell of a segmented complex is assigned to its nearest
medial-axis node (Euclidean distance between the cell's mass center and the
node attribute point, ties to the smaller node id). Because the assignment
objective decouples per cell, this greedy argmin is the exact optimum of the
one-node-per-cell integer program. Branches are maximal link chains between
root/junction/leaf nodes; obstruction queries aggregate the subtree below a
picked node across both segmented meshes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import tet_centroids, tet_signed_volumes, tri_areas
from .mesh_io import TetComplex, TriangleMesh
from .tree_extraction import SkeletonTree


@dataclass(frozen=True)
class Branch:
    branch_id: int
    parent_id: int | None     # parent branch, None for the root chain
    nodes: tuple               # chain of node ids, proximal end first
    length: float              # sum of link lengths along the chain


@dataclass
class MedialAxis:
    """Refined skeleton trees plus their branch decomposition.

    ``trees`` holds one tree per connected component; ``branches`` partition
    all tree links, with chain endpoints shared between adjacent branches.
    ``node_branch`` maps every node to the one branch that owns it for
    aggregation (a node owns to the branch whose chain reaches it from its
    parent side; each root belongs to its first branch).
    """

    trees: list
    branches: list = field(default_factory=list)
    node_branch: dict = field(default_factory=dict)

    def node_ids(self) -> np.ndarray:
        out = []
        for t in self.trees:
            out.extend(t.nodes())
        return np.asarray(sorted(out), dtype=np.int64)

    def coords(self) -> np.ndarray:
        ids = self.node_ids()
        return self.trees[0].coords[ids]

    def tree_of(self, node: int) -> SkeletonTree:
        for t in self.trees:
            if t.contains(node):
                return t
        raise KeyError(f"node {node} is not on the axis")

    def subtree_nodes(self, node: int) -> list:
        """All nodes whose root path passes through ``node`` (inclusive)."""
        t = self.tree_of(node)
        out = []
        stack = [node]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(t.children.get(n, ()))
        return sorted(out)


def decompose_branches(axis_trees) -> MedialAxis:
    """Split trees into maximal chains at roots, junctions, and leaves.

    Branch ids are assigned in level order with children visited in node-id
    order, so the decomposition is deterministic for a given tree.
    """
    if isinstance(axis_trees, SkeletonTree):
        axis_trees = [axis_trees]
    axis = MedialAxis(trees=list(axis_trees))
    branches = []
    node_branch = {}
    for tree in axis.trees:
        stack = [(tree.root, None)]  # (chain start, parent branch id)
        while stack:
            start, parent_bid = stack.pop(0)
            for first in sorted(tree.children.get(start, ())):
                chain = [start, first]
                while True:
                    kids = sorted(tree.children.get(chain[-1], ()))
                    if len(kids) != 1 or tree.degree(chain[-1]) >= 3:
                        break
                    chain.append(kids[0])
                bid = len(branches)
                length = sum(tree.link_weight(a, b) for a, b in zip(chain, chain[1:]))
                branches.append(Branch(bid, parent_bid, tuple(chain), float(length)))
                for n in chain[1:]:
                    node_branch[n] = bid
                if parent_bid is None and tree.root not in node_branch:
                    node_branch[tree.root] = bid
                stack.append((chain[-1], bid))
        if tree.n_nodes == 1:  # degenerate single-node component
            bid = len(branches)
            branches.append(Branch(bid, None, (tree.root,), 0.0))
            node_branch[tree.root] = bid
    axis.branches = branches
    axis.node_branch = node_branch
    return axis


@dataclass
class SegmentationMap:
    """Total assignment of one complex's cells to axis nodes."""

    complex: TetComplex
    assignment: np.ndarray        # (C,) axis node id per cell
    cell_volumes: np.ndarray      # (C,) unsigned volumes
    node_cell_count: dict         # node id -> number of cells
    node_volume: dict             # node id -> summed volume

    def cells_of_nodes(self, nodes) -> np.ndarray:
        mask = np.isin(self.assignment, np.asarray(list(nodes), dtype=np.int64))
        return np.flatnonzero(mask)


def nearest_node_exhaustive(points: np.ndarray, node_ids: np.ndarray,
                            node_coords: np.ndarray) -> np.ndarray:
    """Reference O(|N||C|) scan; ties resolve to the smaller node id.

    ``node_ids`` must be sorted ascending so argmin's first-hit rule
    implements the tie-break.
    """
    out = np.empty(len(points), dtype=np.int64)
    chunk = max(1, int(4e6 // max(len(node_ids), 1)))
    for s in range(0, len(points), chunk):
        block = points[s:s + chunk]
        d2 = ((block[:, None, :] - node_coords[None, :, :]) ** 2).sum(axis=2)
        out[s:s + chunk] = node_ids[np.argmin(d2, axis=1)]
    return out


def nearest_node_indexed(points: np.ndarray, node_ids: np.ndarray,
                         node_coords: np.ndarray) -> np.ndarray:
    """KD-tree accelerated nearest node, exactly matching the exhaustive scan.

    Near-ties returned by the tree are re-evaluated with the same squared
    distance arithmetic the scan uses, so the chosen ids agree even on exact
    distance ties.
    """
    tree = cKDTree(node_coords)
    dist, idx = tree.query(points, k=min(2, len(node_ids)))
    if len(node_ids) == 1:
        return node_ids[np.zeros(len(points), dtype=np.int64)]
    # both routes compute distances to ~1e-15 relative accuracy, so only
    # gaps this small can order differently between them
    ambiguous = dist[:, 1] - dist[:, 0] <= 1e-12 * np.maximum(dist[:, 0], 1.0)
    choice = idx[:, 0].astype(np.int64)
    for i in np.flatnonzero(ambiguous):
        cand = tree.query_ball_point(points[i], dist[i, 0] * (1 + 1e-12) + 1e-300)
        cand = np.asarray(sorted(cand), dtype=np.int64)
        d2 = ((points[i][None, :] - node_coords[cand]) ** 2).sum(axis=1)
        choice[i] = cand[np.argmin(d2)]
    return node_ids[choice]


def segment(complex_: TetComplex, axis: MedialAxis,
            accelerated: bool = True) -> SegmentationMap:
    """Assign every cell of ``complex_`` to its nearest axis node."""
    node_ids = axis.node_ids()
    if len(node_ids) == 0:
        raise ValueError("empty axis")
    coords = axis.trees[0].coords[node_ids]
    centers = tet_centroids(complex_.vertices, complex_.cells)
    if accelerated and len(node_ids) > 1:
        assignment = nearest_node_indexed(centers, node_ids, coords)
    else:
        assignment = nearest_node_exhaustive(centers, node_ids, coords)
    volumes = np.abs(tet_signed_volumes(complex_.vertices, complex_.cells))
    node_count = {}
    node_volume = {}
    for nid in node_ids:
        node_count[int(nid)] = 0
        node_volume[int(nid)] = 0.0
    order = np.argsort(assignment, kind="stable")
    sorted_assign = assignment[order]
    bounds = np.searchsorted(sorted_assign, node_ids)
    bounds = np.append(bounds, len(sorted_assign))
    for k, nid in enumerate(node_ids):
        sel = order[bounds[k]:bounds[k + 1]]
        node_count[int(nid)] = int(len(sel))
        node_volume[int(nid)] = float(volumes[sel].sum())
    return SegmentationMap(complex_, assignment, volumes, node_count, node_volume)


@dataclass(frozen=True)
class BranchMassProperties:
    branch_id: int
    length: float
    volume: float
    surface_area: float
    thickness: float | None  # 2 x mean node distance to the artery surface
    cell_count: int


def surface_area_by_node(mesh: TriangleMesh, axis: MedialAxis) -> dict:
    """Surface area subtended by each axis node.

    Mesh faces are assigned to their nearest axis node by face centroid, the
    same rule cells follow. With a boundary-conforming tetrahedralization
    this coincides with summing the boundary faces of assigned cells; unlike
    the complex boundary of the internal approximation it is immune to folds,
    and the per-node areas always sum to the exact mesh area.
    """
    node_ids = axis.node_ids()
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    coords = axis.trees[0].coords[node_ids]
    if len(node_ids) > 1:
        owner = nearest_node_indexed(centroids, node_ids, coords)
    else:
        owner = node_ids[np.zeros(len(centroids), dtype=np.int64)]
    areas = tri_areas(mesh.vertices, mesh.faces)
    out = {int(n): 0.0 for n in node_ids}
    for nid, a in zip(owner, areas):
        out[int(nid)] += float(a)
    return out


def mass_properties(seg: SegmentationMap, axis: MedialAxis,
                    surface: TriangleMesh | None = None) -> list:
    """Per-branch volume, surface area, length, and thickness proxy.

    Volume sums the unsigned cell volumes over the branch's owned nodes.
    Surface area assigns the source surface's faces to nearest axis nodes
    (see :func:`surface_area_by_node`); without a surface it falls back to
    the complex's own boundary faces, attributed through their owning cells.
    Thickness (surface given) is twice the mean distance from the branch's
    axis nodes to the nearest surface vertex, a diameter proxy. Branch length
    is the chain length along its links.
    """
    area_by_node = None
    if surface is not None:
        area_by_node = surface_area_by_node(surface, axis)
        surf_tree = cKDTree(surface.vertices)
    else:
        bf_areas = tri_areas(seg.complex.vertices, seg.complex.boundary_faces) \
            if len(seg.complex.boundary_faces) else np.zeros(0)
        lut = np.full(int(max(axis.node_branch, default=0)) + 1, -1, dtype=np.int64)
        for n, bid in axis.node_branch.items():
            lut[n] = bid
        cell_branch = lut[seg.assignment]
        surf_tree = None

    out = []
    for b in axis.branches:
        owned = sorted(int(n) for n in b.nodes
                       if axis.node_branch.get(int(n)) == b.branch_id)
        vol = sum(seg.node_volume.get(n, 0.0) for n in owned)
        count = sum(seg.node_cell_count.get(n, 0) for n in owned)
        if area_by_node is not None:
            area = sum(area_by_node.get(n, 0.0) for n in owned)
        elif len(seg.complex.boundary_faces):
            on_branch = cell_branch[seg.complex.boundary_face_cells] == b.branch_id
            area = float(bf_areas[on_branch].sum())
        else:
            area = 0.0
        thickness = None
        if surf_tree is not None:
            node_pts = axis.trees[0].coords[np.asarray(b.nodes, dtype=np.int64)]
            d, _ = surf_tree.query(node_pts)
            thickness = float(2.0 * np.mean(d))
        out.append(BranchMassProperties(b.branch_id, b.length, float(vol),
                                        float(area), thickness, int(count)))
    return out


@dataclass(frozen=True)
class ObstructionResult:
    picked: int
    downstream_nodes: tuple
    artery_cells: np.ndarray
    territory_cells: np.ndarray
    territory_volume: float
    territory_area: float


def downstream_totals(axis: MedialAxis, per_node: dict) -> dict:
    """Subtree total of a non-negative per-node quantity, post-order.

    ``total(n) = own(n) + sum(total(c) for children c in id order)`` with
    plain sequential float additions. Because every operand is non-negative,
    ``total(parent) >= total(child)`` holds exactly in floating point; the
    analysis bundle stores these values and the viewer reproduces the
    identical recursion.
    """
    totals = {}
    for tree in axis.trees:
        order = []
        stack = [tree.root]
        while stack:
            n = stack.pop()
            order.append(n)
            stack.extend(sorted(tree.children.get(n, ())))
        for n in reversed(order):
            total = per_node.get(int(n), 0.0)
            for c in sorted(tree.children.get(n, ())):
                total = total + totals[int(c)]
            totals[int(n)] = total
    return totals


def downstream_volumes(axis: MedialAxis, seg: SegmentationMap) -> dict:
    """Subtree volume total per axis node (see :func:`downstream_totals`)."""
    return downstream_totals(axis, seg.node_volume)


def obstruction_query(axis: MedialAxis, artery_map: SegmentationMap,
                      territory_map: SegmentationMap | None, picked: int,
                      territory_surface: TriangleMesh | None = None) -> ObstructionResult:
    """Cells and mass subtended by the subtree below ``picked``.

    The downstream node set contains every axis node whose root path passes
    through the picked node; volume/area aggregate the territory map's cells
    assigned to that set. Surface area uses the territory surface when given
    (per-node face assignment) and the complex boundary otherwise.
    """
    downstream = axis.subtree_nodes(picked)  # raises KeyError for unknown ids
    artery_cells = artery_map.cells_of_nodes(downstream)
    if territory_map is None:
        territory_map = artery_map
    territory_cells = territory_map.cells_of_nodes(downstream)
    volume = downstream_volumes(axis, territory_map)[int(picked)]
    if territory_surface is not None:
        by_node = surface_area_by_node(territory_surface, axis)
        area = sum(by_node.get(int(n), 0.0) for n in downstream)
    else:
        bf = territory_map.complex.boundary_faces
        if len(bf):
            areas = tri_areas(territory_map.complex.vertices, bf)
            in_set = np.isin(territory_map.assignment[territory_map.complex.boundary_face_cells],
                             np.asarray(downstream, dtype=np.int64))
            area = float(areas[in_set].sum())
        else:
            area = 0.0
    return ObstructionResult(picked, tuple(downstream), artery_cells,
                             territory_cells, float(volume), float(area))


def section_clip(complex_: TetComplex, plane_point, plane_normal,
                 assignment: np.ndarray | None = None):
    """Drop cells whose mass centers lie on the normal side of the plane.

    Returns ``(kept_cell_ids, kept_assignment, cut_faces)``: labels are
    untouched, and ``cut_faces`` lists (kept_cell, face_triple) pairs exposed
    by the clip for rendering.
    """
    plane_point = np.asarray(plane_point, dtype=float)
    plane_normal = np.asarray(plane_normal, dtype=float)
    centers = tet_centroids(complex_.vertices, complex_.cells)
    side = (centers - plane_point) @ plane_normal
    keep = side <= 0.0
    kept = np.flatnonzero(keep)
    adj = complex_.cell_adjacency
    dropped_neighbor = (adj >= 0) & ~keep[np.clip(adj, 0, None)]
    rows, slots = np.nonzero(keep[:, None] & dropped_neighbor)
    opposite = np.asarray([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    cut_faces = [(int(c), tuple(int(v) for v in complex_.cells[c][opposite[s]]))
                 for c, s in zip(rows, slots)]
    kept_assignment = assignment[kept] if assignment is not None else None
    return kept, kept_assignment, cut_faces


def clip_mesh(mesh: TriangleMesh, plane_point, plane_normal):
    """Face ids of ``mesh`` whose centroids are on the kept side of the plane."""
    plane_point = np.asarray(plane_point, dtype=float)
    plane_normal = np.asarray(plane_normal, dtype=float)
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    return np.flatnonzero((centroids - plane_point) @ plane_normal <= 0.0)
