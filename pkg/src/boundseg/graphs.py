"""Star graphs around boundary points with log-distance edge weights, and
the edge-vertex fusion that folds those weights into the vertex coordinates.

Each boundary point is the hub of a star over its k nearest neighbors
(drawn from the full cloud). The edge weight is ln of the Euclidean
distance, clamped below at DIST_EPS so duplicate points stay finite.
Fusion adds the summed edge weights to every component of the center and
each neighbor's own weight to every component of that neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pcio import PointCloud
from .spatial import SpatialIndex, knn_all

DIST_EPS = 1.0e-6


@dataclass(frozen=True)
class BoundaryGraphs:
    """Batched star graphs: one row per boundary point, k neighbors each."""

    centers: np.ndarray          # (B, 3)
    neighbors: np.ndarray        # (B, k, 3)
    neighbor_indices: np.ndarray  # (B, k) into the full cloud
    edge_weights: np.ndarray     # (B, k)

    def __len__(self) -> int:
        return self.centers.shape[0]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]


@dataclass(frozen=True)
class FusedGraphs:
    """Edge-vertex fused form of BoundaryGraphs; weights carried through."""

    fused_centers: np.ndarray    # (B, 3)
    fused_neighbors: np.ndarray  # (B, k, 3)
    edge_weights: np.ndarray     # (B, k)

    def __len__(self) -> int:
        return self.fused_centers.shape[0]

    @property
    def k(self) -> int:
        return self.fused_neighbors.shape[1]


def edge_weights_from_distances(dist: np.ndarray) -> np.ndarray:
    """ln(max(distance, DIST_EPS)) elementwise."""
    return np.log(np.maximum(dist, DIST_EPS))


def build_graph(cloud: PointCloud, index: SpatialIndex,
                boundary_indices: np.ndarray, k: int,
                neighbors=None) -> BoundaryGraphs:
    """One star graph per boundary point; neighbors may be any cloud point."""
    boundary_indices = np.ascontiguousarray(boundary_indices, dtype=np.int64)
    if neighbors is not None:
        nbr_idx, nbr_dist = neighbors
        nbr_idx = nbr_idx[boundary_indices]
        nbr_dist = nbr_dist[boundary_indices]
    else:
        nbr_idx, nbr_dist = knn_all(index, k, boundary_indices)
    return BoundaryGraphs(
        centers=cloud.points[boundary_indices],
        neighbors=cloud.points[nbr_idx],
        neighbor_indices=nbr_idx,
        edge_weights=edge_weights_from_distances(nbr_dist),
    )


def fuse_edge_vertex(graphs: BoundaryGraphs) -> FusedGraphs:
    """Broadcast-add the summed weights to centers and each neighbor's weight
    to that neighbor; neighbor sums run in ascending neighbor order."""
    total = graphs.edge_weights.sum(axis=1)
    return FusedGraphs(
        fused_centers=graphs.centers + total[:, None],
        fused_neighbors=graphs.neighbors + graphs.edge_weights[:, :, None],
        edge_weights=graphs.edge_weights,
    )
