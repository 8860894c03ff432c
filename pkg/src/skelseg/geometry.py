"""Low-level geometric primitives shared across the pipeline.

Everything here is vectorized numpy working on plain ``(n, 3)`` float arrays:
triangle/tetrahedron measures, circumspheres, a uniform triangle bucket grid,
ray- and segment-versus-surface crossing counts, and the parity-based
point-in-mesh classifier.
"""

from __future__ import annotations

import numpy as np

# Fraction of the bbox diagonal treated as "grazing" for ray/segment hits.
GRAZE_TOL = 1e-9

# Re-draw budget for rays that keep hitting edges/vertices tangentially.
MAX_RAY_RETRIES = 32


class ParityError(RuntimeError):
    """Raised when a point's inside/outside parity cannot be resolved."""


def tri_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Areas of the given triangles, shape (F,)."""
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def tet_signed_volumes(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Signed volumes of tetrahedra, shape (C,).

    Positive when the fourth vertex sees (v0, v1, v2) counter-clockwise.
    """
    a = vertices[cells[:, 0]]
    b = vertices[cells[:, 1]]
    c = vertices[cells[:, 2]]
    d = vertices[cells[:, 3]]
    return np.einsum("ij,ij->i", np.cross(b - a, c - a), d - a) / 6.0


def tet_centroids(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    return vertices[cells].mean(axis=1)


def tet_circumspheres(vertices: np.ndarray, cells: np.ndarray):
    """Circumcenters and circumradii of tetrahedra.

    Returns ``(centers (C,3), radii (C,), ok (C,) bool)``; cells whose
    circumcenter is numerically unsolvable (near-flat) get ``ok=False`` with
    the centroid substituted and an infinite radius.
    """
    p = vertices[cells]  # (C, 4, 3)
    a = p[:, 0]
    rows = p[:, 1:] - a[:, None, :]  # (C, 3, 3)
    rhs = 0.5 * np.einsum("ijk,ijk->ij", rows, rows)  # (C, 3)
    det = np.linalg.det(rows)
    scale = np.abs(rows).max(axis=(1, 2))
    ok = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300) ** 3
    centers = tet_centroids(vertices, cells)
    radii = np.full(len(cells), np.inf)
    if ok.any():
        sol = np.linalg.solve(rows[ok], rhs[ok][:, :, None])[:, :, 0]
        centers = centers.copy()
        centers[ok] = a[ok] + sol
        radii[ok] = np.linalg.norm(sol, axis=1)
    return centers, radii, ok


def cell_face_areas(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """Areas of the four triangular faces of each cell, shape (C, 4)."""
    faces = cells[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]]  # (C, 4, 3)
    p = vertices[faces]  # (C, 4, 3, 3)
    e1 = p[:, :, 1] - p[:, :, 0]
    e2 = p[:, :, 2] - p[:, :, 0]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=2)


def bbox_diagonal(vertices: np.ndarray) -> float:
    return float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0)))


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
    return v / n


class BucketGrid:
    """Uniform 3D bucket grid over a triangle soup's bounding box.

    Every triangle is registered in every grid cell overlapped by its
    bounding box, so queries return a superset of the truly intersecting
    triangles. Default resolution is ``ceil(cbrt(F))`` cells per axis, which
    keeps the expected candidate count per query O(1) for uniform meshes.
    """

    def __init__(self, vertices: np.ndarray, faces: np.ndarray, resolution=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.faces = np.asarray(faces, dtype=np.int64)
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        diag = np.linalg.norm(hi - lo)
        pad = 1e-9 * max(diag, 1.0)
        self.lo = lo - pad
        self.hi = hi + pad
        if resolution is None:
            resolution = max(1, int(np.ceil(len(self.faces) ** (1.0 / 3.0))))
        self.res = np.full(3, int(resolution), dtype=np.int64)
        self.cell_size = (self.hi - self.lo) / self.res

        tri = self.vertices[self.faces]  # (F, 3, 3)
        lo_cells = self._cell_of(tri.min(axis=1))
        hi_cells = self._cell_of(tri.max(axis=1))
        buckets: dict[tuple[int, int, int], list[int]] = {}
        for f in range(len(self.faces)):
            x0, y0, z0 = lo_cells[f]
            x1, y1, z1 = hi_cells[f]
            for i in range(x0, x1 + 1):
                for j in range(y0, y1 + 1):
                    for k in range(z0, z1 + 1):
                        buckets.setdefault((i, j, k), []).append(f)
        self._buckets = {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}
        self._empty = np.empty(0, dtype=np.int64)

    def _cell_of(self, points: np.ndarray) -> np.ndarray:
        c = np.floor((points - self.lo) / self.cell_size).astype(np.int64)
        return np.clip(c, 0, self.res - 1)

    def candidates_segment(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Candidate triangle ids for a segment, via cell-range overlap.

        Segments in this pipeline are short (a link spans a few cells), so the
        axis-aligned cell range of the segment bbox is a tight superset of a
        3D-DDA walk and cheaper to gather.
        """
        lo = self._cell_of(np.minimum(p, q))
        hi = self._cell_of(np.maximum(p, q))
        out = []
        for i in range(lo[0], hi[0] + 1):
            for j in range(lo[1], hi[1] + 1):
                for k in range(lo[2], hi[2] + 1):
                    b = self._buckets.get((i, j, k))
                    if b is not None:
                        out.append(b)
        if not out:
            return self._empty
        return np.unique(np.concatenate(out))

    def candidates_ray(self, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """Candidate triangle ids along a ray, via 3D-DDA cell traversal."""
        t0, t1 = self._clip_ray(origin, direction)
        if t0 is None:
            return self._empty
        # Amanatides-Woo traversal between entry and exit parameters.
        eps = 1e-12
        pos = origin + direction * (t0 + eps * max(t1 - t0, 1.0))
        cell = self._cell_of(pos[None, :])[0].astype(np.int64)
        step = np.where(direction > 0, 1, -1)
        with np.errstate(divide="ignore"):
            t_delta = np.where(direction != 0, np.abs(self.cell_size / np.where(direction == 0, 1, direction)), np.inf)
            next_boundary = self.lo + (cell + (step > 0)) * self.cell_size
            t_max = np.where(direction != 0, (next_boundary - origin) / np.where(direction == 0, 1, direction), np.inf)
        out = []
        while True:
            b = self._buckets.get((cell[0], cell[1], cell[2]))
            if b is not None:
                out.append(b)
            axis = int(np.argmin(t_max))
            if t_max[axis] > t1:
                break
            cell[axis] += step[axis]
            if cell[axis] < 0 or cell[axis] >= self.res[axis]:
                break
            t_max[axis] += t_delta[axis]
        if not out:
            return self._empty
        return np.unique(np.concatenate(out))

    def _clip_ray(self, origin, direction):
        """Parameter interval of the ray inside the grid box, or (None, None)."""
        t0, t1 = 0.0, np.inf
        for ax in range(3):
            if direction[ax] == 0:
                if origin[ax] < self.lo[ax] or origin[ax] > self.hi[ax]:
                    return None, None
            else:
                ta = (self.lo[ax] - origin[ax]) / direction[ax]
                tb = (self.hi[ax] - origin[ax]) / direction[ax]
                if ta > tb:
                    ta, tb = tb, ta
                t0 = max(t0, ta)
                t1 = min(t1, tb)
        if t0 > t1:
            return None, None
        return t0, t1


def ray_triangle_hits(origin, direction, vertices, faces, t_max=np.inf):
    """Moller-Trumbore against a set of triangles.

    Returns ``(count, degenerate)``: the number of transversal crossings with
    ray parameter in ``(tol, t_max - tol)`` and a flag set when any hit lands
    too close to a triangle edge/vertex, to the ray origin/end, or on a
    near-parallel triangle, in which case the count is unreliable.
    """
    if len(faces) == 0:
        return 0, False
    a = vertices[faces[:, 0]]
    e1 = vertices[faces[:, 1]] - a
    e2 = vertices[faces[:, 2]] - a
    normal = np.cross(e1, e2)
    scale = np.maximum(np.linalg.norm(normal, axis=1), 1e-300)
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)  # == -(n . dir)
    parallel = np.abs(det) <= 1e-12 * scale
    safe_det = np.where(parallel, 1.0, det)
    tvec = origin - a
    u = np.einsum("ij,ij->i", tvec, pvec) / safe_det
    qvec = np.cross(tvec, e1)
    v = np.einsum("ij,j->i", qvec, direction) / safe_det
    t = np.einsum("ij,ij->i", e2, qvec) / safe_det
    w = 1.0 - u - v

    bary_tol = 1e-9
    inside = (u > bary_tol) & (v > bary_tol) & (w > bary_tol) & ~parallel
    near_edge = (
        ((np.abs(u) <= bary_tol) | (np.abs(v) <= bary_tol) | (np.abs(w) <= bary_tol))
        & (u > -bary_tol) & (v > -bary_tol) & (w > -bary_tol) & ~parallel
    )
    # A parallel triangle only matters when the ray runs inside its plane.
    plane_dist = np.abs(np.einsum("ij,ij->i", normal, tvec)) / scale
    tri_extent = np.linalg.norm(e1, axis=1) + np.linalg.norm(e2, axis=1)
    coplanar = parallel & (plane_dist <= GRAZE_TOL * np.maximum(tri_extent, 1.0))

    if np.isfinite(t_max):
        t_tol = GRAZE_TOL * max(t_max, 1.0)
        hits = inside & (t > t_tol) & (t < t_max - t_tol)
        grazing_t = (np.abs(t) <= t_tol) | (np.abs(t - t_max) <= t_tol)
        ahead = (t > -t_tol) & (t < t_max + t_tol)
    else:
        t_tol = GRAZE_TOL
        hits = inside & (t > t_tol)
        grazing_t = np.abs(t) <= t_tol
        ahead = t > -t_tol
    degenerate = bool(
        np.any(near_edge & ahead)
        or np.any((inside | near_edge) & grazing_t)
        or np.any(coplanar)
    )
    return int(np.count_nonzero(hits)), degenerate


def segment_crossings(p, q, grid: BucketGrid):
    """Number of transversal surface crossings of segment p->q.

    Returns ``(count, degenerate)``; with ``degenerate`` set the caller must
    fall back to a direct parity query on the endpoint.
    """
    d = q - p
    n = np.linalg.norm(d)
    if n == 0:
        return 0, False
    cand = grid.candidates_segment(p, q)
    return ray_triangle_hits(p, d / n, grid.vertices, grid.faces[cand], t_max=n)


def point_in_mesh(point, mesh, grid: BucketGrid | None = None, seed: int = 0) -> bool:
    """Parity test: is ``point`` inside the closed surface ``mesh``?

    Casts a seeded pseudo-random ray and counts crossings; directions hitting
    the surface tangentially (near an edge/vertex or parallel face) are
    re-drawn. Raises :class:`ParityError` after the retry budget.
    """
    point = np.asarray(point, dtype=float)
    if grid is None:
        grid = BucketGrid(mesh.vertices, mesh.faces)
    if np.any(point < grid.lo) or np.any(point > grid.hi):
        return False
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RAY_RETRIES):
        direction = random_unit_vector(rng)
        cand = grid.candidates_ray(point, direction)
        count, degenerate = ray_triangle_hits(point, direction, grid.vertices, grid.faces[cand])
        if not degenerate:
            return count % 2 == 1
    raise ParityError(f"unresolvable parity at point {point.tolist()}")


def points_in_mesh(points, mesh, grid: BucketGrid | None = None, seed: int = 0) -> np.ndarray:
    """Vectorized parity test for many points against one closed surface.

    All points share one seeded direction: the mesh is rotated so the ray
    becomes vertical, a 2D column grid buckets the triangles, and each column
    of points is classified in one broadcast crossing count. Points whose
    vertical ray grazes the surface fall back to the scalar test with fresh
    directions.
    """
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return np.zeros(0, dtype=bool)
    rng = np.random.default_rng(seed)
    direction = random_unit_vector(rng)
    # Rotation sending `direction` to +z (Householder-free, Gram-Schmidt).
    zax = direction
    ref = np.array([1.0, 0.0, 0.0]) if abs(zax[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    xax = _unit(np.cross(ref, zax))
    yax = np.cross(zax, xax)
    rot = np.stack([xax, yax, zax])  # world -> rotated frame

    verts = mesh.vertices @ rot.T
    pts = points @ rot.T
    tri = verts[mesh.faces]  # (F, 3, 3)

    inside = np.zeros(len(points), dtype=bool)
    in_box = np.all((points >= mesh.vertices.min(axis=0) - 1e-12) &
                    (points <= mesh.vertices.max(axis=0) + 1e-12), axis=1)
    todo = np.flatnonzero(in_box)
    if len(todo) == 0:
        return inside

    lo = tri[:, :, :2].min(axis=(0, 1))
    hi = tri[:, :, :2].max(axis=(0, 1))
    span = np.maximum(hi - lo, 1e-30)
    res = max(1, int(np.ceil(np.sqrt(len(mesh.faces)))))
    cell = span / res

    def col_of(xy):
        c = np.floor((xy - lo) / cell).astype(np.int64)
        return np.clip(c, 0, res - 1)

    tri_lo = col_of(tri[:, :, :2].min(axis=1))
    tri_hi = col_of(tri[:, :, :2].max(axis=1))
    columns: dict[tuple[int, int], list[int]] = {}
    for f in range(len(tri)):
        for i in range(tri_lo[f, 0], tri_hi[f, 0] + 1):
            for j in range(tri_lo[f, 1], tri_hi[f, 1] + 1):
                columns.setdefault((i, j), []).append(f)

    pt_col = col_of(pts[todo, :2])
    order = np.lexsort((pt_col[:, 1], pt_col[:, 0]))
    todo = todo[order]
    pt_col = pt_col[order]
    bary_tol = 1e-9
    needs_fallback = []

    start = 0
    n_todo = len(todo)
    while start < n_todo:
        end = start
        key = (pt_col[start, 0], pt_col[start, 1])
        while end < n_todo and pt_col[end, 0] == key[0] and pt_col[end, 1] == key[1]:
            end += 1
        fids = columns.get((int(key[0]), int(key[1])))
        idx = todo[start:end]
        start = end
        if fids is None:
            continue  # no surface above or below: stays outside
        t = tri[np.asarray(fids, dtype=np.int64)]  # (T, 3, 3)
        p2 = pts[idx]  # (P, 3)
        a, b, c = t[:, 0], t[:, 1], t[:, 2]
        d0 = (b - a)[:, :2]
        d1 = (c - a)[:, :2]
        denom = d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0]  # (T,)
        vertical = np.abs(denom) <= 1e-14 * np.maximum(
            np.abs(d0).max(axis=1) * np.abs(d1).max(axis=1), 1e-300
        )
        dp = p2[:, None, :2] - a[None, :, :2]  # (P, T, 2)
        inv = 1.0 / np.where(vertical, 1.0, denom)
        u = (dp[:, :, 0] * d1[:, 1] - dp[:, :, 1] * d1[:, 0]) * inv
        v = (dp[:, :, 1] * d0[:, 0] - dp[:, :, 0] * d0[:, 1]) * inv
        w = 1.0 - u - v
        hit = (u > bary_tol) & (v > bary_tol) & (w > bary_tol) & ~vertical
        # A vertical triangle (ray direction in its plane) is a grazing hazard
        # only when the point's 2D position falls inside its projected bbox.
        xy_tol = bary_tol * float(np.linalg.norm(span))
        t_lo = t[:, :, :2].min(axis=1)  # (T, 2)
        t_hi = t[:, :, :2].max(axis=1)
        near_vert = vertical[None, :] & np.all(
            (p2[:, None, :2] >= t_lo[None, :, :] - xy_tol)
            & (p2[:, None, :2] <= t_hi[None, :, :] + xy_tol),
            axis=2,
        )
        grazing = (
            ((np.abs(u) <= bary_tol) | (np.abs(v) <= bary_tol) | (np.abs(w) <= bary_tol))
            & (u > -bary_tol) & (v > -bary_tol) & (w > -bary_tol) & ~vertical
        ) | near_vert
        z_hit = w * a[None, :, 2] + u * b[None, :, 2] + v * c[None, :, 2]
        dz = z_hit - p2[:, None, 2]
        z_tol = GRAZE_TOL * max(float(np.ptp(verts[:, 2])), 1.0)
        above = hit & (dz > z_tol)
        # a point lying on a triangle has no parity: classify outside at once
        on_surface = np.any(hit & (np.abs(dz) <= z_tol), axis=1)
        # grazing strictly below the point cannot corrupt the upward count
        bad = np.any(grazing & ((dz >= -z_tol) | near_vert), axis=1) & ~on_surface
        counts = above.sum(axis=1)
        ok = ~bad & ~on_surface
        inside[idx[ok]] = (counts[ok] % 2) == 1
        needs_fallback.extend(idx[bad].tolist())

    if needs_fallback:
        grid = grid or BucketGrid(mesh.vertices, mesh.faces)
        for i in needs_fallback:
            try:
                inside[i] = point_in_mesh(points[i], mesh, grid, seed=seed + 1 + int(i))
            except ParityError:
                # a point this close to the surface has no meaningful parity;
                # classify it outside so downstream filters drop it
                inside[i] = False
    return inside
