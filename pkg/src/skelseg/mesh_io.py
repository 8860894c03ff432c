"""Surface and tetrahedral mesh types, validation, and file formats.

Surfaces are read/written as ASCII STL, binary STL, or OFF; tetrahedral
complexes are read from the TetGen-style ``.node`` / ``.ele`` text pair.
Validation enforces the closed single-shell model the whole pipeline assumes:
every edge shared by exactly two consistently oriented faces and Euler
characteristic V - E + F = 2.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import tet_signed_volumes, tri_areas

DEFAULT_WELD_TOL = 1e-6  # relative to the bounding-box diagonal


class MeshError(ValueError):
    """Base class for mesh parsing/validation failures."""


class ParseError(MeshError):
    pass


class ValidationError(MeshError):
    pass


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed closed 2-manifold triangle surface.

    ``vertices``: (V, 3) float64, ``faces``: (F, 3) int64 with consistent
    outward orientation. Instances are immutable after construction and safe
    to share across threads.
    """

    vertices: np.ndarray
    faces: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "vertices", _readonly(np.asarray(self.vertices, dtype=np.float64)))
        object.__setattr__(self, "faces", _readonly(np.asarray(self.faces, dtype=np.int64)))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as a (E, 2) sorted-index array."""
        e = self.faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        return np.unique(np.sort(e, axis=1), axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_faces


@dataclass(frozen=True)
class TetComplex:
    """Tetrahedralization with face adjacency and boundary triangles.

    ``cells``: (C, 4) vertex indices, positively oriented.
    ``cell_adjacency``: (C, 4) neighbor cell per face (-1 where none); entry
    ``[c, i]`` is the neighbor across the face opposite vertex ``i``.
    ``boundary_faces``: (B, 3) triangles on the complex boundary, with
    ``boundary_face_cells``: (B,) the owning cell of each.
    """

    vertices: np.ndarray
    cells: np.ndarray
    cell_adjacency: np.ndarray
    boundary_faces: np.ndarray
    boundary_face_cells: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "vertices", _readonly(np.asarray(self.vertices, dtype=np.float64)))
        object.__setattr__(self, "cells", _readonly(np.asarray(self.cells, dtype=np.int64)))
        object.__setattr__(self, "cell_adjacency", _readonly(np.asarray(self.cell_adjacency, dtype=np.int64)))
        object.__setattr__(self, "boundary_faces", _readonly(np.asarray(self.boundary_faces, dtype=np.int64)))
        object.__setattr__(self, "boundary_face_cells", _readonly(np.asarray(self.boundary_face_cells, dtype=np.int64)))

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def n_interior_faces(self) -> int:
        return int(np.count_nonzero(self.cell_adjacency >= 0)) // 2

    def adjacency_pairs(self) -> np.ndarray:
        """Unique (ci, cj) cell pairs sharing a face, ci < cj, shape (L, 2)."""
        c = np.repeat(np.arange(self.n_cells), 4)
        n = self.cell_adjacency.reshape(-1)
        keep = n >= 0
        pairs = np.sort(np.stack([c[keep], n[keep]], axis=1), axis=1)
        return np.unique(pairs, axis=0)

    def total_volume(self) -> float:
        return float(np.abs(tet_signed_volumes(self.vertices, self.cells)).sum())


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# Surface validation

def weld_vertices(vertices: np.ndarray, faces: np.ndarray, tol_rel: float = DEFAULT_WELD_TOL):
    """Merge vertices closer than ``tol_rel`` x bbox diagonal; drop collapsed faces.

    STL stores three explicit vertices per facet, so welding by quantized
    coordinates is what stitches the surface back together. The tolerance is
    relative because absolute thresholds do not survive unit changes.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if len(vertices) == 0:
        return vertices, faces
    diag = np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0))
    tol = tol_rel * max(diag, 1e-300)
    keys = np.round(vertices / tol).astype(np.int64) if tol > 0 else vertices
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    # keep first-occurrence coordinates so welding is order-stable
    new_vertices = vertices[np.sort(first)]
    order = np.argsort(first)
    remap = np.empty(len(first), dtype=np.int64)
    remap[order] = np.arange(len(first))
    new_faces = remap[inverse][faces]
    collapsed = (
        (new_faces[:, 0] == new_faces[:, 1])
        | (new_faces[:, 1] == new_faces[:, 2])
        | (new_faces[:, 2] == new_faces[:, 0])
    )
    return new_vertices, new_faces[~collapsed]


def validate_surface(vertices, faces, label: str = "") -> TriangleMesh:
    """Build a TriangleMesh, enforcing the closed single-shell model.

    Raises :class:`ValidationError` naming the offending simplex for: invalid
    or repeated face indices, degenerate (zero-area) faces, edges with one
    incident face (open boundary), edges with more than two (non-manifold),
    inconsistent orientation, more than one connected shell, or genus > 0.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if faces.ndim != 2 or faces.shape[1] != 3:
        raise ValidationError("faces must be index triples")
    if len(faces) == 0:
        raise ValidationError("mesh has no faces")
    if faces.min(initial=0) < 0 or faces.max(initial=-1) >= len(vertices):
        bad = int(np.flatnonzero((faces < 0).any(axis=1) | (faces >= len(vertices)).any(axis=1))[0])
        raise ValidationError(f"face {bad} references an invalid vertex index")
    same = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 2] == faces[:, 0])
    if same.any():
        raise ValidationError(f"face {int(np.flatnonzero(same)[0])} repeats a vertex index")
    areas = tri_areas(vertices, faces)
    diag = np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0))
    tiny = areas <= 1e-14 * max(diag, 1e-300) ** 2
    if tiny.any():
        raise ValidationError(f"degenerate (zero-area) face {int(np.flatnonzero(tiny)[0])}")

    directed = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    und = np.sort(directed, axis=1)
    edges, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    if (counts != 2).any():
        bad = int(np.flatnonzero(counts != 2)[0])
        i, j = (int(x) for x in edges[bad])
        if counts[bad] == 1:
            raise ValidationError(f"open boundary at edge ({i},{j})")
        raise ValidationError(f"non-manifold edge ({i},{j}) with {int(counts[bad])} incident faces")
    # orientation: the two directed copies of every edge must be opposite
    forward = directed[:, 0] < directed[:, 1]
    fwd_count = np.zeros(len(edges), dtype=np.int64)
    np.add.at(fwd_count, inverse, forward.astype(np.int64))
    if (fwd_count != 1).any():
        bad = int(np.flatnonzero(fwd_count != 1)[0])
        i, j = (int(x) for x in edges[bad])
        raise ValidationError(f"inconsistent face orientation at edge ({i},{j})")

    if not _single_shell(len(vertices), faces):
        raise ValidationError("mesh has more than one connected shell")
    chi = len(vertices) - len(edges) + len(faces)
    if chi != 2:
        raise ValidationError(f"Euler characteristic {chi} != 2 (genus > 0 or extra shells)")
    return TriangleMesh(vertices, faces, label=label)


def _single_shell(n_vertices: int, faces: np.ndarray) -> bool:
    parent = np.arange(n_vertices)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for f in faces:
        a = find(f[0])
        for v in f[1:]:
            b = find(v)
            parent[b] = a
    used = np.unique(faces)
    roots = {find(int(v)) for v in used}
    return len(roots) == 1 and len(used) == n_vertices


def canonical_form(mesh: TriangleMesh):
    """Reindexing-invariant form: lexicographically sorted vertices and faces.

    Two meshes describing the same geometry compare equal under this form no
    matter how their vertices or faces are ordered or their faces rotated.
    """
    order = np.lexsort(mesh.vertices.T[::-1])
    verts = mesh.vertices[order]
    remap = np.empty(len(order), dtype=np.int64)
    remap[order] = np.arange(len(order))
    faces = remap[mesh.faces]
    roll = np.argmin(faces, axis=1)
    faces = np.stack([faces[np.arange(len(faces)), (roll + k) % 3] for k in range(3)], axis=1)
    faces = faces[np.lexsort(faces.T[::-1])]
    return verts, faces


# ---------------------------------------------------------------------------
# Surface IO

def load_surface(path, fmt: str | None = None, weld_tol: float = DEFAULT_WELD_TOL,
                 label: str | None = None) -> TriangleMesh:
    """Load and validate a surface mesh.

    ``fmt`` is one of ``stl-ascii``, ``stl-binary``, ``off``; when omitted it
    is auto-detected from the file content.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    data = path.read_bytes()
    if fmt is None:
        fmt = _detect_format(data)
    if fmt == "off":
        vertices, faces = _parse_off(data)
    elif fmt == "stl-ascii":
        vertices, faces = _parse_stl_ascii(data)
    elif fmt == "stl-binary":
        vertices, faces = _parse_stl_binary(data)
    else:
        raise ParseError(f"unknown format {fmt!r}")
    vertices, faces = weld_vertices(vertices, faces, weld_tol)
    return validate_surface(vertices, faces, label=label if label is not None else path.stem)


def save_surface(mesh: TriangleMesh, path, fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        suffix = path.suffix.lower()
        fmt = "off" if suffix == ".off" else "stl-binary"
    if fmt == "off":
        lines = [b"OFF", f"{mesh.n_vertices} {mesh.n_faces} 0".encode()]
        lines += [f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}".encode() for v in mesh.vertices]
        lines += [f"3 {f[0]} {f[1]} {f[2]}".encode() for f in mesh.faces]
        path.write_bytes(b"\n".join(lines) + b"\n")
    elif fmt == "stl-ascii":
        out = [f"solid {mesh.label or 'mesh'}"]
        for f in mesh.faces:
            a, b, c = mesh.vertices[f]
            n = np.cross(b - a, c - a)
            norm = np.linalg.norm(n)
            n = n / norm if norm > 0 else n
            out.append(f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}")
            out.append("    outer loop")
            for p in (a, b, c):
                out.append(f"      vertex {p[0]:.9e} {p[1]:.9e} {p[2]:.9e}")
            out.append("    endloop")
            out.append("  endfacet")
        out.append(f"endsolid {mesh.label or 'mesh'}")
        path.write_text("\n".join(out) + "\n")
    elif fmt == "stl-binary":
        header = (mesh.label or "mesh").encode()[:80].ljust(80, b" ")
        buf = [header, struct.pack("<I", mesh.n_faces)]
        tri = mesh.vertices[mesh.faces].astype(np.float32)
        normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        lens = np.linalg.norm(normals, axis=1, keepdims=True)
        normals = np.where(lens > 0, normals / np.where(lens == 0, 1, lens), normals).astype(np.float32)
        for i in range(mesh.n_faces):
            buf.append(normals[i].tobytes())
            buf.append(tri[i].tobytes())
            buf.append(b"\x00\x00")
        path.write_bytes(b"".join(buf))
    else:
        raise ParseError(f"unknown format {fmt!r}")


def _detect_format(data: bytes) -> str:
    stripped = data.lstrip()
    if stripped.startswith(b"OFF"):
        return "off"
    if stripped.startswith(b"solid"):
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError:
            return "stl-binary"
        if "facet" in text or "endsolid" in text:
            return "stl-ascii"
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * count:
            return "stl-binary"
    raise ParseError("cannot auto-detect mesh format")


def _parse_stl_ascii(data: bytes):
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError(f"ASCII STL is not ASCII: {exc}") from exc
    verts = []
    n_in_facet = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0] == "vertex":
            if len(tokens) != 4:
                raise ParseError(f"line {lineno}: malformed vertex line")
            try:
                verts.append([float(t) for t in tokens[1:]])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            n_in_facet += 1
        elif tokens[0] == "endloop":
            if n_in_facet != 3:
                raise ParseError(f"line {lineno}: facet with {n_in_facet} vertices")
            n_in_facet = 0
    if not verts:
        raise ParseError("ASCII STL contains no facets")
    vertices = np.asarray(verts, dtype=np.float64)
    faces = np.arange(len(vertices), dtype=np.int64).reshape(-1, 3)
    return vertices, faces


def _parse_stl_binary(data: bytes):
    if len(data) < 84:
        raise ParseError("binary STL shorter than its 84-byte preamble")
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) < 84 + 50 * count:
        raise ParseError(f"binary STL truncated: header claims {count} facets")
    rec = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84).reshape(count, 50)
    tri = rec[:, 12:48].copy().view("<f4").reshape(count, 3, 3).astype(np.float64)
    vertices = tri.reshape(-1, 3)
    faces = np.arange(len(vertices), dtype=np.int64).reshape(-1, 3)
    return vertices, faces


def _parse_off(data: bytes):
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError(f"OFF is not ASCII: {exc}") from exc
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise ParseError("missing OFF header")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3  # skip edge count
        vertices = np.asarray([float(t) for t in tokens[pos:pos + 3 * nv]], dtype=np.float64).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for _ in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise ParseError(f"non-triangular OFF face with {k} vertices")
            faces.append([int(t) for t in tokens[pos + 1:pos + 4]])
            pos += 1 + k
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed OFF: {exc}") from exc
    return vertices, np.asarray(faces, dtype=np.int64)


# ---------------------------------------------------------------------------
# Tetrahedral complexes

def build_tet_complex(vertices, cells, label: str = "", repair_orientation: bool = True) -> TetComplex:
    """Assemble a TetComplex from raw vertices and cell index 4-tuples.

    Cells with negative signed volume are repaired by swapping two vertices
    (or rejected with ``repair_orientation=False``); zero-volume cells are
    always an error. Adjacency is reconstructed by hashing sorted face
    triples; a face shared by more than two cells is invalid.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    cells = np.asarray(cells, dtype=np.int64)
    if cells.ndim != 2 or cells.shape[1] != 4:
        raise ValidationError("cells must be index 4-tuples")
    if cells.min(initial=0) < 0 or cells.max(initial=-1) >= len(vertices):
        bad = int(np.flatnonzero((cells < 0).any(axis=1) | (cells >= len(vertices)).any(axis=1))[0])
        raise ValidationError(f"cell {bad} references an invalid vertex index")
    vols = tet_signed_volumes(vertices, cells)
    flat = vols == 0.0
    if flat.any():
        raise ValidationError(f"cell {int(np.flatnonzero(flat)[0])} has zero volume")
    inverted = vols < 0
    if inverted.any():
        if not repair_orientation:
            raise ValidationError(f"cell {int(np.flatnonzero(inverted)[0])} has negative volume")
        cells = cells.copy()
        cells[inverted] = cells[inverted][:, [0, 2, 1, 3]]

    # face opposite local vertex i, for i = 0..3
    faces = cells[:, [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]].reshape(-1, 3)
    keys = np.sort(faces, axis=1)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    if (counts > 2).any():
        bad = uniq[np.flatnonzero(counts > 2)[0]]
        raise ValidationError(f"face {tuple(int(x) for x in bad)} shared by more than two cells")

    n = len(cells)
    owner_cell = np.repeat(np.arange(n), 4)
    owner_slot = np.tile(np.arange(4), n)
    adjacency = np.full((n, 4), -1, dtype=np.int64)
    order = np.argsort(inverse, kind="stable")
    si = inverse[order]
    boundary_rows = []
    i = 0
    while i < len(si):
        j = i + 1
        if j < len(si) and si[j] == si[i]:
            r0, r1 = order[i], order[j]
            adjacency[owner_cell[r0], owner_slot[r0]] = owner_cell[r1]
            adjacency[owner_cell[r1], owner_slot[r1]] = owner_cell[r0]
            i += 2
        else:
            boundary_rows.append(order[i])
            i += 1
    boundary_rows = np.asarray(boundary_rows, dtype=np.int64)
    boundary_faces = faces[boundary_rows] if len(boundary_rows) else np.empty((0, 3), dtype=np.int64)
    boundary_cells = owner_cell[boundary_rows] if len(boundary_rows) else np.empty(0, dtype=np.int64)
    return TetComplex(vertices, cells, adjacency, boundary_faces, boundary_cells, label=label)


def load_tet_complex(node_path, ele_path, label: str | None = None,
                     repair_orientation: bool = True) -> TetComplex:
    """Read a TetGen-style ``.node`` / ``.ele`` pair.

    Cell vertex references are resolved through the node ids actually listed
    in the ``.node`` file, so 0-based and 1-based files are handled uniformly.
    """
    node_path, ele_path = Path(node_path), Path(ele_path)
    nodes, node_ids = _parse_indexed_table(node_path, ncols=3, kind="node")
    cells, _ = _parse_indexed_table(ele_path, ncols=4, kind="ele")
    id_to_row = {int(i): r for r, i in enumerate(node_ids)}
    try:
        cells = np.asarray([[id_to_row[int(v)] for v in c] for c in cells], dtype=np.int64)
    except KeyError as exc:
        raise ParseError(f"{ele_path.name}: cell references unknown node id {exc.args[0]}") from exc
    return build_tet_complex(nodes, cells, label=label if label is not None else node_path.stem,
                             repair_orientation=repair_orientation)


def save_tet_complex(complex_: TetComplex, node_path, ele_path) -> None:
    node_path, ele_path = Path(node_path), Path(ele_path)
    lines = [f"{len(complex_.vertices)} 3 0 0"]
    lines += [f"{i} {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}" for i, v in enumerate(complex_.vertices)]
    node_path.write_text("\n".join(lines) + "\n")
    lines = [f"{len(complex_.cells)} 4 0"]
    lines += [f"{i} {c[0]} {c[1]} {c[2]} {c[3]}" for i, c in enumerate(complex_.cells)]
    ele_path.write_text("\n".join(lines) + "\n")


def _parse_indexed_table(path: Path, ncols: int, kind: str):
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    rows = []
    header = None
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if header is None:
            header = tokens
            continue
        rows.append(tokens)
    if header is None:
        raise ParseError(f"{path.name}: empty file")
    try:
        declared = int(header[0])
    except ValueError as exc:
        raise ParseError(f"{path.name}: bad header {header!r}") from exc
    if len(rows) < declared:
        raise ParseError(f"{path.name}: header declares {declared} rows, found {len(rows)}")
    rows = rows[:declared]
    try:
        idx = np.asarray([int(r[0]) for r in rows])
        if kind == "node":
            data = np.asarray([[float(x) for x in r[1:1 + ncols]] for r in rows], dtype=np.float64)
        else:
            data = np.asarray([[int(x) for x in r[1:1 + ncols]] for r in rows], dtype=np.int64)
    except (ValueError, IndexError) as exc:
        raise ParseError(f"{path.name}: malformed row: {exc}") from exc
    if len(np.unique(idx)) != len(idx):
        raise ParseError(f"{path.name}: duplicate row index")
    order = np.argsort(idx)
    return data[order], idx[order]
