"""Command-line interface.

Subcommands: ``fixtures`` (generate test meshes), ``skeletonize`` (mesh to
medial axis bundle), ``segment`` (artery + territory to full bundle),
``bundle`` (validate / re-emit / canonicalize a bundle), ``bench`` (scaling
measurements). Exit codes: 0 ok, 2 validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .delaunay import TetrahedralizationError
from .fixtures import generate_fixture
from .geometry import ParityError
from .mesh_io import MeshError, save_surface
from .pipeline import (PipelineConfig, PipelineError, bench_csv, bench_scaling,
                       bundle_to_json, canonical_bundle_json, load_bundle,
                       run_pipeline, write_bundle)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


def _add_pipeline_flags(p: argparse.ArgumentParser, with_territory: bool) -> None:
    p.add_argument("--artery", required=True, help="artery surface mesh (STL/OFF)")
    if with_territory:
        p.add_argument("--territory", help="territory surface mesh (STL/OFF)")
    p.add_argument("--tet-source", choices=["internal", "files"], default="internal")
    p.add_argument("--node", help="artery .node file (tet-source=files)")
    p.add_argument("--ele", help="artery .ele file (tet-source=files)")
    if with_territory:
        p.add_argument("--territory-node", help="territory .node file")
        p.add_argument("--territory-ele", help="territory .ele file")
    p.add_argument("--format", choices=["stl-ascii", "stl-binary", "off"],
                   help="input format (default: auto-detect)")
    p.add_argument("--weld-tol", type=float, default=1e-6,
                   help="vertex weld tolerance, relative to bbox diagonal")
    p.add_argument("--supersample", type=float,
                   help="max surface edge length before tetrahedralization")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", default="auto",
                   help="hair-shaving threshold; a length or 'auto' (mean delta)")
    p.add_argument("--alpha1", type=float, default=0.5)
    p.add_argument("--alpha2", type=float, default=0.5)
    p.add_argument("--root-mode", choices=["automatic", "manual"], default="automatic")
    p.add_argument("--root-pick", type=int, help="node id for manual root mode")
    p.add_argument("--skip-stage", action="append", default=[],
                   choices=["outrageous", "shave", "straighten"],
                   help="skip a refinement stage (repeatable, for ablation)")
    p.add_argument("--plain-arrays", action="store_true",
                   help="emit arrays as plain JSON lists instead of base64")
    p.add_argument("--trace", help="write the extraction trace CSV here")
    p.add_argument("--out", required=True, help="output bundle path")


def _config_from_args(args, with_territory: bool) -> PipelineConfig:
    epsilon = None if args.epsilon == "auto" else float(args.epsilon)
    return PipelineConfig(
        artery_path=args.artery,
        territory_path=getattr(args, "territory", None) if with_territory else None,
        tet_source=args.tet_source,
        artery_node_path=args.node,
        artery_ele_path=args.ele,
        territory_node_path=getattr(args, "territory_node", None) if with_territory else None,
        territory_ele_path=getattr(args, "territory_ele", None) if with_territory else None,
        mesh_format=args.format,
        weld_tol=args.weld_tol,
        supersample=args.supersample,
        seed=args.seed,
        epsilon=epsilon,
        alpha1=args.alpha1,
        alpha2=args.alpha2,
        root_mode=args.root_mode,
        root_pick=args.root_pick,
        skip_stages=list(args.skip_stage),
        plain_arrays=args.plain_arrays,
        out_path=args.out,
        trace_path=args.trace,
    )


def cmd_fixtures(args) -> int:
    params = json.loads(args.params) if args.params else {}
    if args.n_faces is not None:
        params["n_faces"] = args.n_faces
    if args.noise is not None:
        params["noise"] = args.noise
    fx = generate_fixture(args.kind, params, seed=args.seed)
    save_surface(fx.mesh, args.out, fmt=args.format)
    if args.truth:
        truth = {
            "centerlines": [c.tolist() for c in fx.truth.centerlines],
            "junctions": fx.truth.junctions.tolist(),
            "radii": list(fx.truth.radii),
            "analytic_volume": fx.truth.analytic_volume,
            "analytic_area": fx.truth.analytic_area,
        }
        Path(args.truth).write_text(json.dumps(truth, indent=2) + "\n")
    print(f"wrote {args.out}: {fx.mesh.n_vertices} vertices, {fx.mesh.n_faces} faces")
    return EXIT_OK


def cmd_skeletonize(args) -> int:
    config = _config_from_args(args, with_territory=False)
    bundle = run_pipeline(config)
    write_bundle(bundle, args.out)
    n_axis = len(bundle["axis"]["branches"])
    print(f"wrote {args.out}: {n_axis} branches, "
          f"{bundle['timings']['total']:.2f}s total")
    return EXIT_OK


def cmd_segment(args) -> int:
    config = _config_from_args(args, with_territory=True)
    bundle = run_pipeline(config)
    write_bundle(bundle, args.out)
    print(f"wrote {args.out}: {len(bundle['axis']['branches'])} branches, "
          f"{bundle['timings']['total']:.2f}s total")
    return EXIT_OK


def cmd_bundle(args) -> int:
    bundle = load_bundle(args.infile)
    text = canonical_bundle_json(bundle) if args.canonical else bundle_to_json(bundle)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rows, slopes = bench_scaling(tuple(sizes), seed=args.seed)
    csv = bench_csv(rows, slopes)
    if args.out:
        Path(args.out).write_text(csv)
        print(f"wrote {args.out}")
    else:
        print(csv, end="")
    for k, v in sorted(slopes.items()):
        print(f"{k}: slope {v:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skelseg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"skelseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixtures", help="generate a procedural test mesh")
    p.add_argument("--kind", required=True,
                   choices=["cylinder", "y_tube", "three_level_tree", "box"])
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["stl-ascii", "stl-binary", "off"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-faces", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--params", help="extra parameters as a JSON object")
    p.add_argument("--truth", help="write ground-truth JSON here")
    p.set_defaults(fn=cmd_fixtures)

    p = sub.add_parser("skeletonize", help="medial axis of one tubular mesh")
    _add_pipeline_flags(p, with_territory=False)
    p.set_defaults(fn=cmd_skeletonize)

    p = sub.add_parser("segment", help="fused segmentation of artery + territory")
    _add_pipeline_flags(p, with_territory=True)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("bundle", help="validate / re-emit an analysis bundle")
    p.add_argument("infile")
    p.add_argument("--out")
    p.add_argument("--canonical", action="store_true",
                   help="null the timing fields for determinism comparisons")
    p.set_defaults(fn=cmd_bundle)

    p = sub.add_parser("bench", help="scaling measurements on a fixture family")
    p.add_argument("--sizes", default="6000,12000,24000,48000",
                   help="comma-separated face counts (>= 4)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as exc:
        cause = exc.cause
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(cause, (TetrahedralizationError, ParityError,
                              np.linalg.LinAlgError, FloatingPointError)):
            return EXIT_NUMERIC
        return EXIT_VALIDATION
    except (MeshError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TetrahedralizationError, ParityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
