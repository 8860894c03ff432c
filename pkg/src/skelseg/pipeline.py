"""End-to-end orchestration and the JSON analysis bundle.

The pipeline runs the nine-step sequence per connected component: interior
tetrahedralization of the artery, dual graph, tree extraction, the three
refinement stages, tetrahedralization of the optional territory mesh, and the
fused segmentation of both complexes against the refined axis. Wall-clock
time is recorded in three phases (extraction / refinement / segmentation).

The bundle is a self-contained JSON document: config echo, embedded geometry,
axis with branch hierarchy and mass properties, per-cell assignments,
per-node and downstream aggregates, the refinement report, and timings.
Large arrays are base64-encoded little-endian (float32/int32) unless the
config asks for plain nested lists.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .delaunay import delaunay_interior
from .fixtures import generate_fixture
from .geometry import BucketGrid, points_in_mesh
from .mesh_io import TriangleMesh, load_surface, load_tet_complex
from .refinement import (RefinementReport, remove_outrageous, shave_hairs,
                         straighten_bumpy)
from .segmentation import (MedialAxis, decompose_branches, downstream_totals,
                           mass_properties, segment, surface_area_by_node)
from .skeleton_graph import build_graph, select_root
from .tree_extraction import extract_tree, extraction_trace_csv

SCHEMA_VERSION = 1

STAGE_NAMES = ("outrageous", "shave", "straighten")

# smallest connected component worth skeletonizing; below this a component is
# a tetrahedralization artifact, not a separate vessel
MIN_COMPONENT_CELLS = 4


class PipelineError(RuntimeError):
    """Raised when a pipeline stage fails; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    artery_path: str = ""
    territory_path: str | None = None
    tet_source: str = "internal"            # "internal" | "files"
    artery_node_path: str | None = None
    artery_ele_path: str | None = None
    territory_node_path: str | None = None
    territory_ele_path: str | None = None
    mesh_format: str | None = None          # None = auto-detect
    weld_tol: float = 1e-6
    supersample: float | None = None
    seed: int = 0
    epsilon: float | None = None            # None = auto (mean delta)
    alpha1: float = 0.5
    alpha2: float = 0.5
    root_mode: str = "automatic"
    root_pick: int | None = None
    skip_stages: list = field(default_factory=list)
    plain_arrays: bool = False
    out_path: str | None = None
    trace_path: str | None = None  # extraction trace CSV, one file per component

    def validate(self) -> None:
        if self.tet_source not in ("internal", "files"):
            raise ValueError(f"tet_source must be internal or files, got {self.tet_source!r}")
        if self.tet_source == "files" and not (self.artery_node_path and self.artery_ele_path):
            raise ValueError("tet_source=files requires artery .node/.ele paths")
        if self.root_mode not in ("automatic", "manual"):
            raise ValueError(f"root_mode must be automatic or manual, got {self.root_mode!r}")
        if self.root_mode == "manual" and self.root_pick is None:
            raise ValueError("manual root mode requires root_pick")
        for s in self.skip_stages:
            if s not in STAGE_NAMES:
                raise ValueError(f"unknown stage {s!r} in skip_stages")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("alpha thresholds must be non-negative")
        if self.supersample is not None and self.supersample <= 0:
            raise ValueError("supersample must be positive")


def _encode_array(a: np.ndarray, dtype: str, plain: bool):
    cast = a.astype({"f32": "<f4", "f64": "<f8", "i32": "<i4"}[dtype])
    if plain:
        return {"encoding": "plain", "dtype": dtype, "shape": list(a.shape),
                "data": cast.tolist()}
    return {"encoding": "b64le", "dtype": dtype, "shape": list(a.shape),
            "data": base64.b64encode(np.ascontiguousarray(cast).tobytes()).decode("ascii")}


def decode_array(obj: dict) -> np.ndarray:
    dtype = {"f32": "<f4", "f64": "<f8", "i32": "<i4"}[obj["dtype"]]
    if obj["encoding"] == "plain":
        return np.asarray(obj["data"], dtype=dtype).reshape(obj["shape"])
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype=dtype).reshape(obj["shape"]).copy()


def run_pipeline(config: PipelineConfig,
                 artery_mesh: TriangleMesh | None = None,
                 territory_mesh: TriangleMesh | None = None) -> dict:
    """Execute the full pipeline and return the analysis bundle dict.

    Meshes may be passed in memory (tests, demos); otherwise they are loaded
    from the configured paths. The bundle is a pure function of the config,
    the input geometry, and the seed, except for the ``timings`` block.
    """
    config.validate()
    timings = {}
    t_start = time.perf_counter()

    def staged(stage, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:  # noqa: BLE001 - report stage and re-raise
            raise PipelineError(stage, exc) from exc

    t0 = time.perf_counter()
    if artery_mesh is None:
        artery_mesh = staged("load-artery", load_surface, config.artery_path,
                             fmt=config.mesh_format, weld_tol=config.weld_tol)
    if territory_mesh is None and config.territory_path:
        territory_mesh = staged("load-territory", load_surface, config.territory_path,
                                fmt=config.mesh_format, weld_tol=config.weld_tol)
    timings["load"] = time.perf_counter() - t0

    # Phase I: tetrahedralization, dual graph, tree extraction
    t0 = time.perf_counter()
    if config.tet_source == "files":
        artery_complex = staged("tetrahedralize-artery", load_tet_complex,
                                config.artery_node_path, config.artery_ele_path)
    else:
        artery_complex = staged("tetrahedralize-artery", delaunay_interior,
                                artery_mesh, sampling=config.supersample, seed=config.seed)
    graph = staged("adjacency-graph", build_graph, artery_complex)
    inside_mask = staged("root-classification", points_in_mesh,
                         graph.coords, artery_mesh, seed=config.seed)
    roots = staged("select-root", select_root, graph, config.root_mode,
                   config.root_pick, candidate_mask=inside_mask)
    t_extract0 = time.perf_counter()
    trees = []
    for comp, root in enumerate(roots.node_ids):
        # sliver artifacts can form tiny components, possibly with every
        # circumcenter outside the surface; they carry no medial content
        ids = graph.component_nodes(comp)
        if len(ids) < MIN_COMPONENT_CELLS or not inside_mask[ids].any():
            continue
        tree, trace = staged("tree-extraction", extract_tree, graph, root,
                             trace=config.trace_path is not None)
        if config.trace_path is not None:
            path = Path(config.trace_path)
            path = path.with_name(f"{path.stem}_c{comp}{path.suffix}") if comp else path
            path.write_text(extraction_trace_csv(trace))
        trees.append(tree)
    if not trees:
        raise PipelineError("tree-extraction",
                            ValueError("no component has nodes inside the surface"))
    timings["tree_extraction"] = time.perf_counter() - t_extract0
    timings["phase1"] = time.perf_counter() - t0

    # Phase II: refinement to the medial axis
    t0 = time.perf_counter()
    grid = BucketGrid(artery_mesh.vertices, artery_mesh.faces)
    reports = []
    refined = []
    for tree in trees:
        report = RefinementReport()
        for name in STAGE_NAMES:
            if name in config.skip_stages:
                report.record(name, tree.n_nodes, tree.n_nodes)
                continue
            if name == "outrageous":
                tree, r = staged("remove-outrageous", remove_outrageous,
                                 tree, artery_mesh, grid, seed=config.seed)
            elif name == "shave":
                tree, r = staged("shave-hairs", shave_hairs, tree, config.epsilon)
            else:
                tree, r = staged("straighten-bumpy", straighten_bumpy, tree,
                                 config.alpha1, config.alpha2,
                                 mesh=artery_mesh, grid=grid, seed=config.seed)
            report.merge(r)
        refined.append(tree)
        reports.append(report)
    axis = staged("branch-decomposition", decompose_branches, refined)
    timings["phase2"] = time.perf_counter() - t0

    # Phase III: territory tetrahedralization and fused segmentation
    t0 = time.perf_counter()
    territory_complex = None
    if territory_mesh is not None:
        if config.tet_source == "files" and config.territory_node_path:
            territory_complex = staged("tetrahedralize-territory", load_tet_complex,
                                       config.territory_node_path, config.territory_ele_path)
        else:
            territory_complex = staged("tetrahedralize-territory", delaunay_interior,
                                       territory_mesh, sampling=config.supersample,
                                       seed=config.seed)
    t_seg0 = time.perf_counter()
    artery_map = staged("segment-artery", segment, artery_complex, axis)
    territory_map = None
    if territory_complex is not None:
        territory_map = staged("segment-territory", segment, territory_complex, axis)
    timings["segmentation"] = time.perf_counter() - t_seg0
    timings["phase3"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    return assemble_bundle(config, artery_mesh, territory_mesh, axis,
                           artery_map, territory_map, reports, timings)


def _seg_block(seg, mesh, axis, plain):
    cx = seg.complex
    centers = cx.vertices[cx.cells].mean(axis=1)
    area_by_node = surface_area_by_node(mesh, axis)
    face_owner = _face_owners(mesh, axis)
    return {
        "assignment": _encode_array(seg.assignment, "i32", plain),
        "cell_centers": _encode_array(centers, "f32", plain),
        "boundary_faces": _encode_array(cx.boundary_faces, "i32", plain),
        "boundary_face_cells": _encode_array(cx.boundary_face_cells, "i32", plain),
        "vertices": _encode_array(cx.vertices, "f32", plain),
        "surface_face_nodes": _encode_array(face_owner, "i32", plain),
        "node_volume": {str(k): v for k, v in sorted(seg.node_volume.items())},
        "node_surface_area": {str(k): v for k, v in sorted(area_by_node.items())},
        "node_cell_count": {str(k): v for k, v in sorted(seg.node_cell_count.items())},
        "total_volume": float(sum(seg.node_volume[k] for k in sorted(seg.node_volume))),
    }


def _face_owners(mesh, axis):
    from .segmentation import nearest_node_indexed

    node_ids = axis.node_ids()
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    if len(node_ids) == 1:
        return node_ids[np.zeros(len(centroids), dtype=np.int64)]
    return nearest_node_indexed(centroids, node_ids, axis.trees[0].coords[node_ids])


def assemble_bundle(config, artery_mesh, territory_mesh, axis: MedialAxis,
                    artery_map, territory_map, reports, timings) -> dict:
    plain = config.plain_arrays
    node_ids = axis.node_ids()
    coords = axis.trees[0].coords[node_ids]
    links = []
    for t in axis.trees:
        links.extend([int(p), int(c)] for c, p in sorted(t.parent.items()))
    links.sort()

    props = mass_properties(artery_map, axis, surface=artery_mesh)
    by_id = {p.branch_id: p for p in props}
    terr_props = None
    if territory_map is not None:
        terr_props = {p.branch_id: p for p in
                      mass_properties(territory_map, axis, surface=territory_mesh)}

    branches = []
    for b in axis.branches:
        p = by_id[b.branch_id]
        row = {
            "id": b.branch_id,
            "parent": b.parent_id,
            "nodes": [int(n) for n in b.nodes],
            "length": b.length,
            "artery_volume": p.volume,
            "artery_surface_area": p.surface_area,
            "artery_cell_count": p.cell_count,
            "thickness": p.thickness,
        }
        if terr_props is not None:
            tp = terr_props[b.branch_id]
            row["territory_volume"] = tp.volume
            row["territory_surface_area"] = tp.surface_area
            row["territory_cell_count"] = tp.cell_count
        branches.append(row)

    readout_map = territory_map if territory_map is not None else artery_map
    readout_mesh = territory_mesh if territory_map is not None else artery_mesh
    downstream_vol = downstream_totals(axis, readout_map.node_volume)
    downstream_area = downstream_totals(
        axis, surface_area_by_node(readout_mesh, axis))

    bundle = {
        "schema_version": SCHEMA_VERSION,
        "generator": f"skelseg {__version__}",
        "config": asdict(config),
        "meshes": {
            "artery": {
                "label": artery_mesh.label,
                "vertices": _encode_array(artery_mesh.vertices, "f32", plain),
                "faces": _encode_array(artery_mesh.faces, "i32", plain),
            },
            "territory": None if territory_mesh is None else {
                "label": territory_mesh.label,
                "vertices": _encode_array(territory_mesh.vertices, "f32", plain),
                "faces": _encode_array(territory_mesh.faces, "i32", plain),
            },
        },
        "axis": {
            "node_ids": _encode_array(node_ids, "i32", plain),
            "node_coords": _encode_array(coords, "f32", plain),
            "links": links,
            "roots": [int(t.root) for t in axis.trees],
            "parents": {str(int(c)): int(p) for t in axis.trees
                        for c, p in sorted(t.parent.items())},
            "branches": branches,
            "node_branch": {str(int(n)): int(b) for n, b in sorted(axis.node_branch.items())},
        },
        "segmentation": {
            "artery": _seg_block(artery_map, artery_mesh, axis, plain),
            "territory": None if territory_map is None else
                _seg_block(territory_map, territory_mesh, axis, plain),
        },
        "obstruction": {
            "downstream_volume": {str(k): v for k, v in sorted(downstream_vol.items())},
            "downstream_surface_area": {str(k): v for k, v in sorted(downstream_area.items())},
        },
        "refinement": [r.to_dict() for r in reports],
        "timings": {k: float(v) for k, v in timings.items()},
    }
    return bundle


def bundle_to_json(bundle: dict) -> str:
    return json.dumps(bundle, sort_keys=True, separators=(",", ":"), allow_nan=False)


def canonical_bundle_json(bundle: dict) -> str:
    """Deterministic serialization: the timing block is replaced by nulls."""
    out = dict(bundle)
    out["timings"] = {k: None for k in sorted(bundle.get("timings", {}))}
    return bundle_to_json(out)


def write_bundle(bundle: dict, path) -> None:
    """Serialize atomically so a failing run never leaves a partial bundle."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(bundle_to_json(bundle))
    tmp.replace(path)


def load_bundle(path) -> dict:
    bundle = json.loads(Path(path).read_text())
    if bundle.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported bundle schema {bundle.get('schema_version')!r}")
    return bundle


def bench_scaling(face_counts=(6000, 12000, 24000, 48000), seed: int = 0,
                  kind: str = "cylinder", params: dict | None = None,
                  repeats: int = 4):
    """Timing and size measurements over a fixture family of growing size.

    Each run pairs the tubular artery fixture with a box territory whose face
    count tracks the artery's, so segmentation does the workload the pipeline
    sees in practice. Every size is run ``repeats`` times and the per-phase
    minimum is kept (scheduler noise only ever adds time). Returns
    ``(rows, slopes)``: one row per size with mesh/graph sizes and per-phase
    times, and the fitted log-log slopes of graph size, extraction time, and
    segmentation time against face count.
    """
    if len(face_counts) < 4:
        raise ValueError("need at least 4 sizes for a slope fit")
    timing_keys = ("phase1", "phase2", "phase3", "tree_extraction",
                   "segmentation", "total")
    rows = []
    for n in face_counts:
        fx = generate_fixture(kind, dict(params or {}, n_faces=int(n)), seed=seed)
        lo = fx.mesh.vertices.min(axis=0)
        hi = fx.mesh.vertices.max(axis=0)
        box = generate_fixture("box", {
            "size": tuple(float(s) for s in (hi - lo) * 1.5 + 1.0),
            "n_per_axis": max(2, int(np.sqrt(n / 12.0))),
        }, seed=seed)
        config = PipelineConfig(artery_path=f"<{kind}:{n}>",
                                territory_path=f"<box:{n}>", seed=seed)
        best = None
        bundle = None
        for _ in range(max(1, repeats)):
            bundle = run_pipeline(config, artery_mesh=fx.mesh, territory_mesh=box.mesh)
            timing = bundle["timings"]
            if best is None:
                best = {k: timing[k] for k in timing_keys}
            else:
                best = {k: min(best[k], timing[k]) for k in timing_keys}
        node_ids = decode_array(bundle["axis"]["node_ids"])
        row = {
            "faces": fx.mesh.n_faces,
            "vertices": fx.mesh.n_vertices,
            "territory_faces": box.mesh.n_faces,
            "graph_nodes": len(decode_array(bundle["segmentation"]["artery"]["assignment"])),
            "territory_cells": len(decode_array(bundle["segmentation"]["territory"]["assignment"])),
            "axis_nodes": len(node_ids),
        }
        row.update(best)
        rows.append(row)

    faces = np.asarray([r["faces"] for r in rows], dtype=float)

    def slope(key):
        y = np.asarray([max(r[key], 1e-9) for r in rows], dtype=float)
        return float(np.polyfit(np.log(faces), np.log(y), 1)[0])

    slopes = {
        "graph_nodes": slope("graph_nodes"),
        "tree_extraction_time": slope("tree_extraction"),
        "segmentation_time": slope("segmentation"),
    }
    return rows, slopes


def bench_csv(rows, slopes) -> str:
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols))
    lines.append("")
    for k, v in sorted(slopes.items()):
        lines.append(f"# loglog_slope {k} {v!r}")
    return "\n".join(lines) + "\n"
