"""Boundary/non-boundary classification from neighborhood statistics.

A point is flagged as boundary when its neighbor normals disagree (mean
angle above theta_angle) or its neighborhood is lopsided (centroid offset
ratio above tau_offset); the two symptoms combine with a configurable
OR/AND rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .pcio import PointCloud
from .spatial import NeighborhoodStats

RULES = ("or", "and")


@dataclass(frozen=True)
class BoundaryThresholds:
    theta_angle: float = 0.30
    tau_offset: float = 0.50
    combine: str = "or"

    def __post_init__(self):
        if not 0.0 < self.theta_angle < math.pi / 2:
            raise ValueError("theta_angle must lie in (0, pi/2)")
        if not self.tau_offset > 0.0:
            raise ValueError("tau_offset must be > 0")
        if self.combine not in RULES:
            raise ValueError(f"combine must be one of {RULES}")


@dataclass(frozen=True)
class BoundaryMask:
    flags: np.ndarray

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.flags).astype(np.int64)

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.flags).astype(np.int64)

    @property
    def boundary_fraction(self) -> float:
        return float(self.flags.mean())


@dataclass(frozen=True)
class CloudSplit:
    """Boundary/interior partition with maps back to original positions."""

    boundary_points: np.ndarray
    interior_points: np.ndarray
    boundary_indices: np.ndarray
    interior_indices: np.ndarray
    boundary_labels: np.ndarray | None
    interior_labels: np.ndarray | None


def classify_boundary(stats: NeighborhoodStats, thr: BoundaryThresholds) -> BoundaryMask:
    angle_hit = stats.mean_angle > thr.theta_angle
    offset_hit = stats.offset_ratio > thr.tau_offset
    if thr.combine == "or":
        flags = angle_hit | offset_hit
    else:
        flags = angle_hit & offset_hit
    return BoundaryMask(flags=flags)


def split_cloud(cloud: PointCloud, mask: BoundaryMask) -> CloudSplit:
    """Partition the cloud; either side may come out empty."""
    if mask.flags.shape != (cloud.n,):
        raise LengthMismatch(f"mask length {mask.flags.shape} != cloud size {cloud.n}")
    b_idx = mask.boundary_indices
    i_idx = mask.interior_indices
    labels = cloud.labels
    return CloudSplit(
        boundary_points=cloud.points[b_idx],
        interior_points=cloud.points[i_idx],
        boundary_indices=b_idx,
        interior_indices=i_idx,
        boundary_labels=None if labels is None else labels[b_idx],
        interior_labels=None if labels is None else labels[i_idx],
    )
