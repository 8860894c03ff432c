"""Adjacency graph dual to a tetrahedral complex, plus root selection.

One graph node per cell, attributed with the cell's circumsphere center; one
link per interior face, weighted by the Euclidean distance between the two
attribute points (hop-count weighting available for comparison). Nodes whose
circumcenter blows up (sliver cells) fall back to the cell centroid and are
flagged; such nodes are exactly the outside-the-surface candidates the
refinement stage later removes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import cell_face_areas, tet_centroids, tet_circumspheres
from .mesh_io import TetComplex

# circumradius ceiling in bounding-box diagonals before the centroid fallback
DEGENERATE_RADIUS_FACTOR = 10.0

# floor for link weights after degeneracy handling, relative to bbox diagonal
MIN_WEIGHT_FACTOR = 1e-12


@dataclass(frozen=True)
class SkeletonGraph:
    """Dual adjacency graph G(N, L) of a tetrahedral complex."""

    coords: np.ndarray            # (N, 3) node attribute points
    circumradius: np.ndarray      # (N,)
    largest_face_area: np.ndarray  # (N,)
    cell_ids: np.ndarray          # (N,) cell index behind each node
    degenerate: np.ndarray        # (N,) bool, centroid substituted
    links: np.ndarray             # (L, 2) node ids, first < second
    weights: np.ndarray           # (L,) strictly positive
    component_id: np.ndarray      # (N,)
    weight_floor: float = 0.0     # positive clamp applied to degenerate links

    @property
    def n_nodes(self) -> int:
        return len(self.coords)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_components(self) -> int:
        return int(self.component_id.max()) + 1 if self.n_nodes else 0

    def neighbors(self) -> list:
        """Adjacency lists [(neighbor, weight), ...] per node, id-sorted."""
        adj = [[] for _ in range(self.n_nodes)]
        for (a, b), w in zip(self.links, self.weights):
            adj[a].append((int(b), float(w)))
            adj[b].append((int(a), float(w)))
        for lst in adj:
            lst.sort()
        return adj

    def component_nodes(self, component: int) -> np.ndarray:
        return np.flatnonzero(self.component_id == component)

    def edge_list_text(self) -> str:
        """Debug dump: one ``a b weight`` line per link."""
        return "\n".join(f"{a} {b} {float(w)!r}" for (a, b), w in zip(self.links, self.weights))


@dataclass(frozen=True)
class RootSelection:
    """One root node per connected component."""

    node_ids: tuple  # root node id per component, indexed by component id
    mode: str        # "automatic" | "manual"


def build_graph(complex_: TetComplex, weighting: str = "euclidean") -> SkeletonGraph:
    """Construct the dual graph of ``complex_`` in time linear in cells."""
    if weighting not in ("euclidean", "hops"):
        raise ValueError(f"unknown weighting {weighting!r}")
    verts, cells = complex_.vertices, complex_.cells
    centers, radii, ok = tet_circumspheres(verts, cells)
    if len(verts):
        diag = float(np.linalg.norm(verts.max(axis=0) - verts.min(axis=0)))
    else:
        diag = 1.0
    centroids = tet_centroids(verts, cells)
    degenerate = ~ok | (radii > DEGENERATE_RADIUS_FACTOR * max(diag, 1e-300))
    coords = np.where(degenerate[:, None], centroids, centers)
    face_areas = cell_face_areas(verts, cells).max(axis=1)

    links = complex_.adjacency_pairs()
    floor = MIN_WEIGHT_FACTOR * max(diag, 1e-300)
    if weighting == "euclidean":
        weights = np.linalg.norm(coords[links[:, 0]] - coords[links[:, 1]], axis=1)
        weights = np.maximum(weights, floor)
    else:
        # hop weighting changes path selection only; trees stay geometric
        weights = np.ones(len(links))

    component = _connected_components(len(cells), links)
    return SkeletonGraph(
        coords=coords,
        circumradius=radii,
        largest_face_area=face_areas,
        cell_ids=np.arange(len(cells), dtype=np.int64),
        degenerate=degenerate,
        links=links,
        weights=weights,
        component_id=component,
        weight_floor=floor,
    )


def _connected_components(n: int, links: np.ndarray) -> np.ndarray:
    parent = np.arange(n, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b in links:
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.asarray([find(int(i)) for i in range(n)], dtype=np.int64)
    _, component = np.unique(roots, return_inverse=True)
    return component.astype(np.int64)


def select_root(graph: SkeletonGraph, mode: str = "automatic",
                manual_pick: int | None = None,
                candidate_mask: np.ndarray | None = None) -> RootSelection:
    """Pick the tree root per component.

    Automatic mode follows the fat-end heuristic: the node whose cell carries
    the largest triangular face (ties to the lowest cell id). The optional
    ``candidate_mask`` restricts automatic candidates (the pipeline passes an
    inside-the-surface mask so the root is never an outrageous node); a
    component with no eligible candidate falls back to the unrestricted pick.
    Manual mode validates the pick and fills the remaining components
    automatically.
    """
    if graph.n_nodes == 0:
        raise ValueError("empty graph")
    if mode not in ("automatic", "manual"):
        raise ValueError(f"unknown root mode {mode!r}")
    roots = []
    for comp in range(graph.n_components):
        ids = graph.component_nodes(comp)
        if candidate_mask is not None and candidate_mask[ids].any():
            ids = ids[candidate_mask[ids]]
        areas = graph.largest_face_area[ids]
        best = ids[np.lexsort((graph.cell_ids[ids], -areas))[0]]
        roots.append(int(best))
    if mode == "manual":
        if manual_pick is None:
            raise ValueError("manual root mode requires a node id")
        if not (0 <= manual_pick < graph.n_nodes):
            raise ValueError(f"manual root {manual_pick} is not a graph node")
        roots[int(graph.component_id[manual_pick])] = int(manual_pick)
    return RootSelection(node_ids=tuple(roots), mode=mode)
