"""Exact k-nearest-neighbor queries and PCA normal estimation.

A balanced kd-tree (median splits on the widest axis) is built once per
cloud; queries rank candidates by (squared distance, point index) and are
guaranteed to match a brute-force scan exactly. The query/normal/stats
inner loops run through the numba backend when active, with vectorized
numpy fallbacks producing the same results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels_numpy, backend
from .errors import BadIndex, KTooLarge, KTooSmall, TooFewPoints
from .pcio import PointCloud

LEAF_SIZE = 16


@dataclass(frozen=True)
class SpatialIndex:
    """Immutable kd-tree over a cloud's points."""

    points: np.ndarray
    perm: np.ndarray
    node_axis: np.ndarray
    node_split: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_end: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class Neighborhood:
    """k nearest neighbors of one cloud member, nearest first."""

    center_index: int
    indices: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class NormalField:
    """Unit normals (unsigned orientation) plus degenerate-neighborhood flags."""

    normals: np.ndarray
    degenerate: np.ndarray


@dataclass(frozen=True)
class NeighborhoodStats:
    """Per-point boundary indicators: mean neighbor-normal angle in
    [0, pi/2] and centroid offset over mean neighbor distance."""

    mean_angle: np.ndarray
    offset_ratio: np.ndarray


def build_index(cloud: PointCloud) -> SpatialIndex:
    """Build the kd-tree; deterministic for a given cloud."""
    points = cloud.points
    n = points.shape[0]
    if n < 2:
        raise TooFewPoints("need at least 2 points to build a spatial index")
    perm = np.arange(n, dtype=np.int64)
    naxis: list[int] = []
    nsplit: list[float] = []
    nleft: list[int] = []
    nright: list[int] = []
    nstart: list[int] = []
    nend: list[int] = []

    def new_node() -> int:
        naxis.append(-1)
        nsplit.append(0.0)
        nleft.append(-1)
        nright.append(-1)
        nstart.append(0)
        nend.append(0)
        return len(naxis) - 1

    stack = [(0, n, new_node())]
    while stack:
        lo, hi, slot = stack.pop()
        if hi - lo <= LEAF_SIZE:
            nstart[slot] = lo
            nend[slot] = hi
            continue
        seg = perm[lo:hi].copy()
        coords = points[seg]
        spread = coords.max(axis=0) - coords.min(axis=0)
        ax = int(np.argmax(spread))
        order = np.lexsort((seg, coords[:, ax]))
        perm[lo:hi] = seg[order]
        mid = (lo + hi) // 2
        naxis[slot] = ax
        nsplit[slot] = float(points[perm[mid], ax])
        left = new_node()
        right = new_node()
        nleft[slot] = left
        nright[slot] = right
        stack.append((lo, mid, left))
        stack.append((mid, hi, right))

    return SpatialIndex(
        points=points,
        perm=perm,
        node_axis=np.asarray(naxis, dtype=np.int64),
        node_split=np.asarray(nsplit, dtype=np.float64),
        node_left=np.asarray(nleft, dtype=np.int64),
        node_right=np.asarray(nright, dtype=np.int64),
        node_start=np.asarray(nstart, dtype=np.int64),
        node_end=np.asarray(nend, dtype=np.int64),
    )


def knn_all(index: SpatialIndex, k: int, centers: np.ndarray | None = None):
    """Neighbor indices and distances, shape (len(centers), k), for every
    center (default: all points). Self is excluded; order is (d2, index)."""
    n = index.n
    if k < 1:
        raise KTooSmall("k must be >= 1")
    if k > n - 1:
        raise KTooLarge(f"k={k} but the cloud only has {n} points")
    if centers is None:
        centers = np.arange(n, dtype=np.int64)
    else:
        centers = np.ascontiguousarray(centers, dtype=np.int64)
        if centers.size and (centers.min() < 0 or centers.max() >= n):
            raise BadIndex("center index out of range")
    if backend.active_backend() == "numba":
        from . import _kernels_numba

        out_idx = np.empty((centers.shape[0], k), dtype=np.int64)
        out_dist = np.empty((centers.shape[0], k), dtype=np.float64)
        _kernels_numba.kdtree_knn(
            index.points,
            index.perm,
            index.node_axis,
            index.node_split,
            index.node_left,
            index.node_right,
            index.node_start,
            index.node_end,
            centers,
            k,
            out_idx,
            out_dist,
        )
        return out_idx, out_dist
    return _kernels_numpy.knn_all(index.points, index, centers, k)


def knn(index: SpatialIndex, center: int, k: int) -> Neighborhood:
    """The k nearest distinct points to one cloud member."""
    if not 0 <= center < index.n:
        raise BadIndex(f"center {center} out of range for {index.n} points")
    idx, dist = knn_all(index, k, np.asarray([center], dtype=np.int64))
    return Neighborhood(center_index=center, indices=idx[0], distances=dist[0])


def estimate_normals(cloud: PointCloud, index: SpatialIndex, k: int,
                     neighbors=None) -> NormalField:
    """PCA normal per point from its k neighbors plus the point itself.

    The normal is the eigenvector of the smallest covariance eigenvalue,
    sign-fixed so the largest-magnitude component is positive. Rank < 2
    neighborhoods fall back to (0, 0, 1) and are flagged degenerate.
    """
    if k < 3:
        raise KTooSmall("normal estimation needs k >= 3")
    nbr_idx = neighbors[0] if neighbors is not None else knn_all(index, k)[0]
    if backend.active_backend() == "numba":
        from . import _kernels_numba

        normals = np.empty((cloud.n, 3))
        flags = np.empty(cloud.n, dtype=np.bool_)
        _kernels_numba.pca_normals(cloud.points, nbr_idx, normals, flags)
    else:
        normals, flags = _kernels_numpy.pca_normals(cloud.points, nbr_idx)
    return NormalField(normals=normals, degenerate=flags)


def neighborhood_stats(cloud: PointCloud, index: SpatialIndex,
                       normals: NormalField, k: int,
                       neighbors=None) -> NeighborhoodStats:
    """Boundary indicators: mean of arccos(|n_i . n_j|) over neighbors, and
    neighborhood centroid offset divided by mean neighbor distance."""
    if neighbors is not None:
        nbr_idx, nbr_dist = neighbors
    else:
        nbr_idx, nbr_dist = knn_all(index, k)
    if backend.active_backend() == "numba":
        from . import _kernels_numba

        angle = np.empty(cloud.n)
        ratio = np.empty(cloud.n)
        _kernels_numba.neighbor_stats(
            cloud.points, nbr_idx, nbr_dist, normals.normals, angle, ratio
        )
    else:
        angle, ratio = _kernels_numpy.neighbor_stats(
            cloud.points, nbr_idx, nbr_dist, normals.normals
        )
    return NeighborhoodStats(mean_angle=angle, offset_ratio=ratio)
