"""Boundary-aware point cloud semantic segmentation.

Points whose neighborhoods look chaotic (disagreeing normals, lopsided
neighbor distribution) are routed through a graph-attention feature
extractor; the rest take a cheap pointwise path. A shared global feature
comes from a pooling layer over every point's neighborhood. Training runs
on a small tape-based float64 autodiff engine, and the spatial inner loops
(KNN, normals, statistics) have numba-JIT kernels with numpy fallbacks
selected by the BOUNDSEG_BACKEND environment variable.
"""

from .backend import active_backend, set_backend
from .boundary import BoundaryMask, BoundaryThresholds, classify_boundary, split_cloud
from .graphs import BoundaryGraphs, FusedGraphs, build_graph, fuse_edge_vertex
from .pcio import PointCloud, ShapeSpec, gen_shape, read_labels, read_xyz, write_labels, write_xyz
from .spatial import SpatialIndex, build_index, estimate_normals, knn, knn_all, neighborhood_stats
from .trainer import TrainConfig, bench_boundary_speedup, evaluate, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "BoundaryGraphs",
    "BoundaryMask",
    "BoundaryThresholds",
    "FusedGraphs",
    "PointCloud",
    "ShapeSpec",
    "SpatialIndex",
    "TrainConfig",
    "active_backend",
    "bench_boundary_speedup",
    "build_graph",
    "build_index",
    "classify_boundary",
    "estimate_normals",
    "evaluate",
    "fuse_edge_vertex",
    "gen_shape",
    "knn",
    "knn_all",
    "load_checkpoint",
    "neighborhood_stats",
    "read_labels",
    "read_xyz",
    "save_checkpoint",
    "set_backend",
    "split_cloud",
    "train",
    "write_labels",
    "write_xyz",
    "__version__",
]
