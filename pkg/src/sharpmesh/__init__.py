"""Feature-aware surface remeshing toolkit.

Reconstructs sharp geometric features in coarse iso-surfaced triangle meshes
by snapping vertices toward feature curves and flipping edges for maximal
expected normal-consistency improvement. The guidance fields can be computed
exactly from ground truth (oracle mode), estimated from geometry alone
(heuristic mode), or supplied by an external predictor through field files.
"""
from .curves import FeatureCurveSet
from .engine import (
    RemeshConfig,
    flip_pass,
    postprocess_flips,
    run_pipeline,
    select_noninteracting_flips,
    snap_vertices,
)
from .estimator import FeatureRemesher
from .fields import EdgeField, VertexField
from .guidance import (
    distance_direction_fields,
    normal_consistency_faces,
    surface_improvement_field,
)
from .mesh import (
    AdjacencyIndex,
    EditGuard,
    NonManifoldError,
    TriMesh,
    build_adjacency,
    cotangent_laplacian,
    edge_collapse,
    edge_flip,
    simplify_short_edges,
)
from .metrics import MetricsConfig, evaluate_meshes, precision_recall
from .patches import (
    FusionConfig,
    Patch,
    crop_patch,
    fuse_edge_fields,
    fuse_vertex_fields,
    poisson_seeds,
    select_interior_features,
)
from .providers import (
    FieldProvider,
    FieldUnavailable,
    FileFieldProvider,
    HeuristicFieldProvider,
    OracleFieldProvider,
)
from .scaling import ScalingConfig, characteristic_size, scale_for_sampling
from .sdf import SdfGrid, marching_cubes, sdf_grid
from .correspond import CorrespondenceMap, correspondence_map

__version__ = "0.1.0"

__all__ = [
    "AdjacencyIndex",
    "CorrespondenceMap",
    "EdgeField",
    "EditGuard",
    "FeatureCurveSet",
    "FeatureRemesher",
    "FieldProvider",
    "FieldUnavailable",
    "FileFieldProvider",
    "FusionConfig",
    "HeuristicFieldProvider",
    "MetricsConfig",
    "NonManifoldError",
    "OracleFieldProvider",
    "Patch",
    "RemeshConfig",
    "ScalingConfig",
    "SdfGrid",
    "TriMesh",
    "VertexField",
    "build_adjacency",
    "characteristic_size",
    "correspondence_map",
    "cotangent_laplacian",
    "crop_patch",
    "distance_direction_fields",
    "edge_collapse",
    "edge_flip",
    "evaluate_meshes",
    "flip_pass",
    "fuse_edge_fields",
    "fuse_vertex_fields",
    "marching_cubes",
    "normal_consistency_faces",
    "poisson_seeds",
    "postprocess_flips",
    "precision_recall",
    "run_pipeline",
    "scale_for_sampling",
    "sdf_grid",
    "select_interior_features",
    "select_noninteracting_flips",
    "simplify_short_edges",
    "snap_vertices",
    "surface_improvement_field",
]
