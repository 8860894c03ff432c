"""Procedural closed-surface fixtures with ground-truth centerlines.

Tubular fixtures (``y_tube``, ``three_level_tree``) are built by marching
cubes over a capsule-union signed distance field, which yields closed
2-manifold genus-0 meshes by construction; ``cylinder`` and ``box`` are
explicit parametric meshes so analytic volume/area formulas hold exactly.
Every fixture returns the mesh together with the centerline polylines and
junction points used as oracles by the test suite, and is bit-reproducible
for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from skimage import measure

from .mesh_io import TriangleMesh, validate_surface, weld_vertices

# cap dome height as a fraction of the local tube radius
CAP_DOME_FRACTION = 0.02


@dataclass(frozen=True)
class FixtureTruth:
    """Ground truth shipped with a generated fixture."""

    centerlines: list  # list of (k, 3) polyline arrays, root end first
    junctions: np.ndarray  # (J, 3) branch points
    radii: list  # nominal tube radius per centerline
    analytic_volume: float | None = None
    analytic_area: float | None = None


@dataclass(frozen=True)
class Fixture:
    mesh: TriangleMesh
    truth: FixtureTruth


def generate_fixture(kind: str, params: dict | None = None, seed: int = 0) -> Fixture:
    """Generate a named fixture; see the ``make_*`` functions for parameters."""
    params = dict(params or {})
    makers = {
        "cylinder": make_cylinder,
        "y_tube": make_y_tube,
        "three_level_tree": make_three_level_tree,
        "box": make_box,
    }
    if kind not in makers:
        raise ValueError(f"unknown fixture kind {kind!r} (have {sorted(makers)})")
    return makers[kind](seed=seed, **params)


def _noise(rng: np.random.Generator, vertices, normals, amplitude: float):
    if amplitude == 0:
        return vertices
    bump = rng.uniform(-amplitude, amplitude, size=len(vertices))
    return vertices + normals * bump[:, None]


def make_cylinder(radius: float = 1.0, length: float = 10.0, n_faces: int = 2000,
                  noise: float = 0.0, radius2: float | None = None,
                  rounded: bool = False, seed: int = 0) -> Fixture:
    """Closed cylinder (optionally tapered) along +z, poles capped by fans.

    The lateral surface is an inscribed prism, so for the uniform case the
    enclosed volume is exactly ``0.5 * m * r^2 * sin(2*pi/m) * L`` for ``m``
    circumferential segments; the tapered case uses the exact prismatoid
    frustum formula (the lateral quads stay planar under a linear radius
    morph). ``radius2`` is the radius at z = length; a taper puts the fattest
    cells at z = 0, which pins the automatic root to that end.
    """
    r1 = float(radius)
    r2 = float(radius if radius2 is None else radius2)
    if min(r1, r2) <= 0 or length <= 0:
        raise ValueError("radius and length must be positive")
    if noise > 0.3 * min(r1, r2):
        raise ValueError("noise amplitude above 0.3*radius risks self-intersection")
    if rounded:
        mesh = _tube_union_mesh([(np.zeros(3), np.array([0.0, 0.0, length]))],
                                [(r1, r2)], n_faces, noise, seed, "cylinder")
        truth = FixtureTruth(
            centerlines=[np.array([[0.0, 0.0, 0.0], [0.0, 0.0, length]])],
            junctions=np.empty((0, 3)),
            radii=[0.5 * (r1 + r2)],
            analytic_volume=None,  # rounded tapered ends have no tidy closed form
            analytic_area=None,
        )
        return Fixture(mesh, truth)
    r_mean = 0.5 * (r1 + r2)
    m = max(8, int(round(np.sqrt(n_faces * np.pi * r_mean / (2 * length)) * 2)))
    k = max(2, int(round(n_faces / (2 * m))))
    angles = 2 * np.pi * np.arange(m) / m
    unit = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    zs = np.linspace(0.0, length, k)
    radii_z = r1 + (r2 - r1) * zs / length
    rings = np.concatenate([radii_z[j] * unit for j in range(k)])
    verts = [np.column_stack([rings[:, 0], rings[:, 1], np.repeat(zs, m)])]
    # caps are shallow cones (2% of the local radius): flat coplanar caps are
    # hostile to the unconstrained Delaunay pass downstream
    h_lo, h_hi = CAP_DOME_FRACTION * r1, CAP_DOME_FRACTION * r2
    verts.append(np.array([[0.0, 0.0, -h_lo], [0.0, 0.0, length + h_hi]]))
    vertices = np.concatenate(verts)
    lo_pole, hi_pole = m * k, m * k + 1

    faces = []
    for j in range(k - 1):
        base = j * m
        for i in range(m):
            a, b = base + i, base + (i + 1) % m
            c, d = a + m, b + m
            faces.append([a, b, d])
            faces.append([a, d, c])
    for i in range(m):  # bottom cap, outward = -z
        faces.append([lo_pole, (i + 1) % m, i])
    top = (k - 1) * m
    for i in range(m):  # top cap, outward = +z
        faces.append([hi_pole, top + i, top + (i + 1) % m])
    faces = np.asarray(faces, dtype=np.int64)

    if noise > 0:
        rng = np.random.default_rng(seed)
        radial = vertices.copy()
        radial[:, 2] = 0.0
        lens = np.linalg.norm(radial, axis=1, keepdims=True)
        radial = np.where(lens > 0, radial / np.where(lens == 0, 1, lens), 0.0)
        vertices = _noise(rng, vertices, radial, noise)

    mesh = validate_surface(vertices, faces, label="cylinder")
    shape = 0.5 * m * np.sin(2 * np.pi / m)  # polygon area = shape * r^2
    volume = shape * length * (r1**2 + r1 * r2 + r2**2) / 3.0
    volume += shape * (r1**2 * h_lo + r2**2 * h_hi) / 3.0  # cone caps
    if radius2 is None:
        side = 2 * r1 * np.sin(np.pi / m)
        apothem = r1 * np.cos(np.pi / m)
        cap = 0.5 * m * side * np.hypot(apothem, h_lo)
        area = float(m * side * length + 2 * cap)
    else:
        area = None  # no closed form carried for the tapered lateral surface
    truth = FixtureTruth(
        centerlines=[np.array([[0.0, 0.0, 0.0], [0.0, 0.0, length]])],
        junctions=np.empty((0, 3)),
        radii=[r_mean],
        analytic_volume=float(volume),
        analytic_area=area,
    )
    return Fixture(mesh, truth)


def make_box(size=(4.0, 4.0, 4.0), n_per_axis: int = 6, seed: int = 0, noise: float = 0.0) -> Fixture:
    """Axis-aligned box centered at the origin with gridded faces."""
    sx, sy, sz = (float(s) for s in size)
    if min(sx, sy, sz) <= 0:
        raise ValueError("box dimensions must be positive")
    n = max(1, int(n_per_axis))
    t = np.linspace(-0.5, 0.5, n + 1)
    quads = []
    verts = []

    def grid_face(origin, du, dv):
        base = sum(len(v) for v in verts)
        g = origin[None, None, :] + t[:, None, None] * du[None, None, :] + t[None, :, None] * dv[None, None, :]
        verts.append(g.reshape(-1, 3))
        for i in range(n):
            for j in range(n):
                a = base + i * (n + 1) + j
                b = a + 1
                c = a + (n + 1)
                d = c + 1
                quads.append([a, b, d])
                quads.append([a, d, c])

    ex, ey, ez = np.array([sx, 0, 0]), np.array([0, sy, 0]), np.array([0, 0, sz])
    grid_face(ez * 0.5, ex, ey)          # +z: normal +z needs (ex x ey) . z > 0
    grid_face(-ez * 0.5, ey, ex)         # -z
    grid_face(ex * 0.5, ey, ez)          # +x
    grid_face(-ex * 0.5, ez, ey)         # -x
    grid_face(ey * 0.5, ez, ex)          # +y
    grid_face(-ey * 0.5, ex, ez)         # -y
    vertices = np.concatenate(verts)
    faces = np.asarray(quads, dtype=np.int64)
    vertices, faces = weld_vertices(vertices, faces, 1e-9)
    mesh = validate_surface(vertices, faces, label="box")
    truth = FixtureTruth(
        centerlines=[np.array([[0.0, 0.0, -sz / 2], [0.0, 0.0, sz / 2]])],
        junctions=np.empty((0, 3)),
        radii=[min(sx, sy) / 2],
        analytic_volume=sx * sy * sz,
        analytic_area=2 * (sx * sy + sy * sz + sz * sx),
    )
    return Fixture(mesh, truth)


def _capsule_distance(points, a, b, r):
    """Level-set of a rounded tube around segment a-b.

    ``r`` is either a scalar radius or an ``(r_a, r_b)`` pair for a linear
    taper; the zero level is then a rounded tapered tube (not the exact cone
    distance, but a smooth closed surface with the segment as centerline).
    """
    ab = b - a
    denom = float(ab @ ab)
    tpar = np.clip(((points - a) @ ab) / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(points))
    closest = a + tpar[:, None] * ab
    r_a, r_b = (r, r) if np.isscalar(r) else r
    return np.linalg.norm(points - closest, axis=1) - (r_a + (r_b - r_a) * tpar)


def _tube_union_mesh(segments, radii, n_faces, noise, seed, label):
    """Marching-cubes mesh of a union of capsules, with seeded surface noise.

    ``radii`` entries may be scalars or ``(r_a, r_b)`` taper pairs.
    """
    rng = np.random.default_rng(seed)
    pts = np.concatenate([np.stack(s) for s in segments])
    r_max = max(float(np.max(r)) for r in radii)
    lo = pts.min(axis=0) - 4 * r_max
    hi = pts.max(axis=0) + 4 * r_max

    area = 0.0
    for (a, b), r in zip(segments, radii):
        r_mean = float(np.mean(r))
        area += 2 * np.pi * r_mean * np.linalg.norm(b - a) + 2 * np.pi * r_mean**2
    h = float(np.sqrt(2.0 * area / max(n_faces, 64)))
    # tiny seeded origin shift keeps the level set off grid vertices
    lo = lo - rng.uniform(0.05, 0.45, size=3) * h
    dims = np.maximum(((hi - lo) / h).astype(int) + 2, 8)
    axes = [lo[i] + h * np.arange(dims[i]) for i in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)

    sdf = np.full(len(grid), np.inf)
    for (a, b), r in zip(segments, radii):
        sdf = np.minimum(sdf, _capsule_distance(grid, np.asarray(a, float), np.asarray(b, float), r))
    sdf = sdf.reshape(dims)

    verts, faces, normals, _ = measure.marching_cubes(sdf, level=0.0, spacing=(h, h, h))
    verts = verts + lo
    if noise > 0:
        r_min = min(float(np.min(r)) for r in radii)
        if noise > 0.3 * r_min:
            raise ValueError("noise amplitude above 0.3*min(radius) risks self-intersection")
        verts = _noise(rng, verts, normals, noise)
    # enforce outward orientation via the divergence-theorem volume sign
    a0, b0, c0 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    signed6 = float(np.einsum("ij,ij->i", a0, np.cross(b0, c0)).sum())
    if signed6 < 0:
        faces = faces[:, ::-1]
    verts, faces = weld_vertices(verts, faces, 1e-9)
    return validate_surface(verts, faces, label=label)


def make_y_tube(trunk_radius: float = 1.0, branch_radius: float = 0.6,
                junction_z: float = 5.0, branch_length: float = 4.0,
                branch_angle_deg: float = 35.0, n_faces: int = 3000,
                noise: float = 0.0, seed: int = 0) -> Fixture:
    """Trunk along +z splitting into two straight branches at the junction."""
    if not (0 < branch_radius < trunk_radius):
        raise ValueError("branch radius must be positive and smaller than the trunk radius")
    if junction_z <= 0 or branch_length <= 0:
        raise ValueError("junction_z and branch_length must be positive")
    theta = np.deg2rad(branch_angle_deg)
    if not (np.deg2rad(10) <= theta <= np.deg2rad(80)):
        raise ValueError("branch angle outside the non-self-intersecting range [10, 80] deg")
    j = np.array([0.0, 0.0, junction_z])
    tip_a = j + branch_length * np.array([np.sin(theta), 0.0, np.cos(theta)])
    tip_b = j + branch_length * np.array([-np.sin(theta), 0.0, np.cos(theta)])
    segments = [(np.zeros(3), j), (j, tip_a), (j, tip_b)]
    radii = [trunk_radius, branch_radius, branch_radius]
    mesh = _tube_union_mesh(segments, radii, n_faces, noise, seed, "y_tube")
    truth = FixtureTruth(
        centerlines=[np.stack(s) for s in segments],
        junctions=j[None, :],
        radii=radii,
    )
    return Fixture(mesh, truth)


def make_three_level_tree(trunk_radius: float = 1.0, level2_radius: float = 0.65,
                          level3_radius: float = 0.4, trunk_length: float = 5.0,
                          level2_length: float = 4.0, level3_length: float = 4.0,
                          spread_deg: float = 35.0, n_faces: int = 4000,
                          noise: float = 0.0, seed: int = 0) -> Fixture:
    """Binary tree of tubes: trunk, two children, four grandchildren."""
    if not (0 < level3_radius < level2_radius < trunk_radius):
        raise ValueError("radii must decrease strictly from trunk to grandchildren")
    if min(trunk_length, level2_length, level3_length) <= 0:
        raise ValueError("segment lengths must be positive")
    theta = np.deg2rad(spread_deg)
    if not (np.deg2rad(15) <= theta <= np.deg2rad(60)):
        raise ValueError("spread angle outside the non-self-intersecting range [15, 60] deg")

    j1 = np.array([0.0, 0.0, trunk_length])
    dir_a = np.array([np.sin(theta), 0.0, np.cos(theta)])
    dir_b = np.array([-np.sin(theta), 0.0, np.cos(theta)])
    j2a = j1 + level2_length * dir_a
    j2b = j1 + level2_length * dir_b

    def split(direction, out_of_plane):
        axis = np.array([0.0, 1.0, 0.0]) * out_of_plane
        d1 = direction * np.cos(theta) + axis * np.sin(theta)
        d2 = direction * np.cos(theta) - axis * np.sin(theta)
        return d1 / np.linalg.norm(d1), d2 / np.linalg.norm(d2)

    da1, da2 = split(dir_a, 1.0)
    db1, db2 = split(dir_b, 1.0)
    tips = [j2a + level3_length * da1, j2a + level3_length * da2,
            j2b + level3_length * db1, j2b + level3_length * db2]

    segments = [(np.zeros(3), j1), (j1, j2a), (j1, j2b),
                (j2a, tips[0]), (j2a, tips[1]), (j2b, tips[2]), (j2b, tips[3])]
    radii = [trunk_radius, level2_radius, level2_radius,
             level3_radius, level3_radius, level3_radius, level3_radius]
    mesh = _tube_union_mesh(segments, radii, n_faces, noise, seed, "three_level_tree")
    truth = FixtureTruth(
        centerlines=[np.stack(s) for s in segments],
        junctions=np.stack([j1, j2a, j2b]),
        radii=radii,
    )
    return Fixture(mesh, truth)
