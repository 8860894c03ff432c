"""Interior tetrahedralization of a closed surface mesh.

The full Delaunay tetrahedralization of the (optionally supersampled) surface
vertex set is computed with Qhull and then filtered to the cells whose
centroids pass the parity point-in-mesh test. For tubular shapes with
adequate surface sampling this interior subset closely respects the boundary;
an exact externally computed constrained triangulation can always be supplied
through :func:`skelseg.mesh_io.load_tet_complex` instead.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .geometry import BucketGrid, points_in_mesh, tet_signed_volumes
from .mesh_io import TetComplex, TriangleMesh


class TetrahedralizationError(RuntimeError):
    pass


# seeded perturbation, as a fraction of the bbox diagonal, that breaks the
# exact cocircular/cospherical ties structured meshes are full of
JOGGLE_FRACTION = 1e-7


def supersample_surface(mesh: TriangleMesh, max_edge: float) -> np.ndarray:
    """Surface point set refined so no triangle edge exceeds ``max_edge``.

    Midpoint 4-way subdivision; midpoints of shared edges coincide exactly, so
    duplicates are removed by exact match. The result contains all original
    vertices and lies on the original surface.
    """
    if max_edge <= 0:
        raise ValueError("max_edge must be positive")
    verts = mesh.vertices
    tris = verts[mesh.faces]  # (F, 3, 3)
    extra = []
    stack = [tris]
    while stack:
        t = stack.pop()
        e = np.stack([
            np.linalg.norm(t[:, 1] - t[:, 0], axis=1),
            np.linalg.norm(t[:, 2] - t[:, 1], axis=1),
            np.linalg.norm(t[:, 0] - t[:, 2], axis=1),
        ], axis=1)
        split = e.max(axis=1) > max_edge
        if not split.any():
            continue
        t = t[split]
        m01 = 0.5 * (t[:, 0] + t[:, 1])
        m12 = 0.5 * (t[:, 1] + t[:, 2])
        m20 = 0.5 * (t[:, 2] + t[:, 0])
        extra.extend([m01, m12, m20])
        stack.append(np.stack([t[:, 0], m01, m20], axis=1))
        stack.append(np.stack([m01, t[:, 1], m12], axis=1))
        stack.append(np.stack([m20, m12, t[:, 2]], axis=1))
        stack.append(np.stack([m01, m12, m20], axis=1))
    if not extra:
        return verts
    pts = np.concatenate([verts, np.concatenate(extra)])
    return np.unique(pts, axis=0)


def delaunay_interior(mesh: TriangleMesh, sampling: float | None = None,
                      seed: int = 0) -> TetComplex:
    """Tetrahedralize the interior of ``mesh``.

    ``sampling`` is an optional maximum surface edge length; extra boundary
    points are inserted on larger faces before triangulating. Cells are
    retained iff their centroid lies inside the surface (parity test seeded by
    ``seed``), and face adjacency is restricted to retained cells. The result
    is a pure function of ``(mesh, sampling, seed)``.

    Structured meshes carry exactly cocircular/cospherical point groups whose
    Delaunay is ambiguous; a seeded joggle of ~1e-7 of the bounding box
    resolves the ties deterministically (the triangulated, stored coordinates
    are the joggled ones).
    """
    points = mesh.vertices if sampling is None else supersample_surface(mesh, sampling)
    rng = np.random.default_rng(seed)
    diag = float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))
    joggle = JOGGLE_FRACTION * max(diag, 1e-300)
    points = points + rng.uniform(-1.0, 1.0, size=points.shape) * joggle
    try:
        tri = Delaunay(points)
    except QhullError as exc:
        raise TetrahedralizationError(f"degenerate point set: {exc}") from exc

    cells = np.asarray(tri.simplices, dtype=np.int64)
    neighbors = np.asarray(tri.neighbors, dtype=np.int64)
    if len(cells) == 0:
        raise TetrahedralizationError("triangulation produced no cells")

    # coplanar point groups (flat faces, end caps) make qhull emit slivers of
    # joggle-scale thickness (height ~ joggle, so |det| ~ joggle * scale^2);
    # they are not meaningful cells and their centroids sit on the surface,
    # so drop them before the parity pass
    p = points[cells]
    rows = p[:, 1:] - p[:, 0][:, None, :]
    det = np.linalg.det(rows)
    scale = np.maximum(np.abs(rows).max(axis=(1, 2)), 1e-300)
    solid = np.abs(det) > 25.0 * joggle * scale**2
    if not solid.any():
        raise TetrahedralizationError(
            "degenerate point set: every candidate cell is joggle-thin (coplanar input?)")

    centroids = points[cells].mean(axis=1)
    grid = BucketGrid(mesh.vertices, mesh.faces)
    keep = solid.copy()
    keep[solid] = points_in_mesh(centroids[solid], mesh, grid, seed=seed)
    if not keep.any():
        raise TetrahedralizationError("no tetrahedra found inside the surface")

    kept_ids = np.flatnonzero(keep)
    remap = np.full(len(cells), -1, dtype=np.int64)
    remap[kept_ids] = np.arange(len(kept_ids))
    new_cells = cells[kept_ids]
    # qhull neighbor slot i is the cell across the face opposite vertex i,
    # matching TetComplex's adjacency convention
    new_adj = neighbors[kept_ids]
    new_adj = np.where(new_adj >= 0, remap[np.clip(new_adj, 0, None)], -1)

    # re-orient (qhull does not guarantee positive volumes), keeping the
    # adjacency slot association intact by swapping the matching columns
    vols = tet_signed_volumes(points, new_cells)
    flipped = vols < 0
    new_cells[flipped] = new_cells[flipped][:, [0, 2, 1, 3]]
    new_adj[flipped] = new_adj[flipped][:, [0, 2, 1, 3]]

    boundary_mask = new_adj < 0
    rows, slots = np.nonzero(boundary_mask)
    opposite = np.asarray([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
    boundary_faces = new_cells[rows[:, None], opposite[slots]]
    return TetComplex(points, new_cells, new_adj, boundary_faces, rows,
                      label=mesh.label)
