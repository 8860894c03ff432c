"""skelseg: curve-skeleton extraction and skeleton-node territory
segmentation for closed tubular triangle meshes.

The pipeline tetrahedralizes a tubular surface, takes the dual adjacency
graph of the cells (circumcenters as node attributes), extracts an adjacency
tree that avoids premature branching, refines it into a medial axis
(outrageous-node removal, hair shaving, bumpy-node straightening), and then
assigns every cell of one or two tetrahedral complexes to its nearest axis
node, yielding per-branch mass properties and downstream-obstruction queries.
"""

from ._version import __version__

from .delaunay import delaunay_interior, supersample_surface
from .fixtures import Fixture, FixtureTruth, generate_fixture
from .geometry import BucketGrid, ParityError, point_in_mesh, points_in_mesh
from .mesh_io import (MeshError, ParseError, TetComplex, TriangleMesh,
                      ValidationError, build_tet_complex, canonical_form,
                      load_surface, load_tet_complex, save_surface,
                      save_tet_complex, validate_surface, weld_vertices)
from .pipeline import (PipelineConfig, PipelineError, bench_scaling,
                       bundle_to_json, canonical_bundle_json, decode_array,
                       load_bundle, run_pipeline, write_bundle)
from .refinement import (RefinementReport, classify_inside, discrete_curvature,
                         remove_outrageous, shave_hairs, straighten_bumpy)
from .segmentation import (Branch, MedialAxis, ObstructionResult,
                           SegmentationMap, clip_mesh, decompose_branches,
                           downstream_totals, downstream_volumes,
                           mass_properties, nearest_node_exhaustive,
                           nearest_node_indexed, obstruction_query,
                           section_clip, segment, surface_area_by_node)
from .skeleton_graph import RootSelection, SkeletonGraph, build_graph, select_root
from .tree_extraction import (SkeletonTree, extract_tree,
                              extraction_trace_csv, forward_spt,
                              leaf_path_queue, tree_distance)

__all__ = [name for name in dir() if not name.startswith("_")]
