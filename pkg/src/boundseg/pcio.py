"""Point cloud text I/O and synthetic labeled shape generation.

XYZ files are ASCII, one point per line: "x y z" or "x y z label".
Lines starting with '#' and blank lines are skipped. Label files hold one
non-negative decimal integer per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, IoError, SpecError
from .rng import SplitMix64

SHAPE_KINDS = ("cube", "planes", "lbracket")


@dataclass(frozen=True)
class PointCloud:
    """N points with 3D coordinates and optional per-point class labels."""

    points: np.ndarray
    labels: np.ndarray | None = None
    num_classes: int | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValueError(f"points must have shape (N, 3) with N >= 1, got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("points contain non-finite coordinates")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.ascontiguousarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise ValueError("labels length must equal the number of points")
            if (lab < 0).any():
                raise ValueError("labels must be non-negative")
            nc = self.num_classes
            if nc is None:
                nc = int(lab.max()) + 1
                object.__setattr__(self, "num_classes", nc)
            if int(lab.max()) >= nc:
                raise ValueError("every label must be < num_classes")
            lab.flags.writeable = False
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ShapeSpec:
    """Synthetic shape request: kind, point count, noise level, seed."""

    kind: str
    n_points: int
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise SpecError(f"unknown shape kind {self.kind!r}; expected one of {SHAPE_KINDS}")
        if self.n_points < 8:
            raise SpecError("n_points must be >= 8")
        if not (self.noise_sigma >= 0.0 and math.isfinite(self.noise_sigma)):
            raise SpecError("noise_sigma must be finite and >= 0")


def _parse_float(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(f"non-numeric field {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise FormatError(f"non-finite value {tok!r}", lineno)
    return v


def read_xyz(path) -> PointCloud:
    """Read an ASCII XYZ file, with labels iff every data line has 4 fields."""
    try:
        with open(path, "r", encoding="ascii", errors="strict") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc

    coords: list[tuple[float, float, float]] = []
    labels: list[int] = []
    width = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) not in (3, 4):
            raise FormatError(f"expected 3 or 4 fields, got {len(fields)}", lineno)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise FormatError("mixed 3- and 4-field lines", lineno)
        x = _parse_float(fields[0], lineno)
        y = _parse_float(fields[1], lineno)
        z = _parse_float(fields[2], lineno)
        coords.append((x, y, z))
        if width == 4:
            try:
                lab = int(fields[3])
            except ValueError:
                raise FormatError(f"non-integer label {fields[3]!r}", lineno) from None
            if lab < 0:
                raise FormatError(f"negative label {lab}", lineno)
            labels.append(lab)
    if not coords:
        raise FormatError("no data lines in file")
    pts = np.asarray(coords, dtype=np.float64)
    if width == 4:
        return PointCloud(pts, np.asarray(labels, dtype=np.int64))
    return PointCloud(pts)


def write_xyz(path, cloud: PointCloud) -> None:
    """Write a cloud as ASCII XYZ, appending the label column when present."""
    try:
        with open(path, "w", encoding="ascii") as fh:
            if cloud.labels is None:
                for x, y, z in cloud.points.tolist():
                    fh.write(f"{x!r} {y!r} {z!r}\n")
            else:
                labs = cloud.labels.tolist()
                for (x, y, z), lab in zip(cloud.points.tolist(), labs):
                    fh.write(f"{x!r} {y!r} {z!r} {lab}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_labels(path, labels) -> None:
    """One decimal class id per line, newline-terminated."""
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be non-empty")
    try:
        with open(path, "w", encoding="ascii") as fh:
            for lab in labels:
                fh.write(f"{int(lab)}\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_labels(path) -> list[int]:
    """Read one non-negative integer per line."""
    try:
        with open(path, "r", encoding="ascii", errors="strict") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    out: list[int] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            lab = int(line)
        except ValueError:
            raise FormatError(f"non-integer label {line!r}", lineno) from None
        if lab < 0:
            raise FormatError(f"negative label {lab}", lineno)
        out.append(lab)
    if not out:
        raise FormatError("empty label file")
    return out


def gen_shape(spec: ShapeSpec) -> PointCloud:
    """Generate a labeled synthetic shape, deterministic for a fixed seed.

    Draw order: one (selector, a, b) uniform triple per point in point
    order, all from a single splitmix64 stream; then, only when
    noise_sigma > 0, three Gaussians per point in point order from the
    continuation of the same stream.

    Kinds:
      cube     -- unit-cube surface; label = face id 0..5 in the order
                  x=0, x=1, y=0, y=1, z=0, z=1 (faces equal-area, selector
                  scaled by 6).
      planes   -- two unit squares meeting at a right angle along the x
                  axis: label 0 on y=0, label 1 on z=0 (equal areas).
      lbracket -- L profile extruded in z: floor y=0 with x in [0,1]
                  (label 0, area 1) and wall x=1 with y in [0,0.5]
                  (label 1, area 0.5); faces chosen with probability
                  proportional to area.
    """
    rng = SplitMix64(spec.seed)
    n = spec.n_points
    u = rng.uniforms(3 * n).reshape(n, 3)
    sel, a, b = u[:, 0], u[:, 1], u[:, 2]
    pts = np.zeros((n, 3))
    if spec.kind == "cube":
        face = np.minimum((sel * 6.0).astype(np.int64), 5)
        axis = face >> 1          # 0:x, 1:y, 2:z
        side = (face & 1).astype(np.float64)
        other = np.stack([a, b], axis=1)
        for ax in range(3):
            m = axis == ax
            pts[m, ax] = side[m]
            rest = [c for c in range(3) if c != ax]
            pts[m, rest[0]] = other[m, 0]
            pts[m, rest[1]] = other[m, 1]
        labels = face
        num_classes = 6
    elif spec.kind == "planes":
        on_floor = sel < 0.5
        pts[:, 0] = a
        pts[on_floor, 1] = 0.0
        pts[on_floor, 2] = b[on_floor]
        pts[~on_floor, 1] = b[~on_floor]
        pts[~on_floor, 2] = 0.0
        labels = (~on_floor).astype(np.int64)
        num_classes = 2
    else:  # lbracket
        on_floor = sel < (1.0 / 1.5)
        pts[on_floor, 0] = a[on_floor]
        pts[on_floor, 1] = 0.0
        pts[~on_floor, 0] = 1.0
        pts[~on_floor, 1] = 0.5 * a[~on_floor]
        pts[:, 2] = b
        labels = (~on_floor).astype(np.int64)
        num_classes = 2
    if spec.noise_sigma > 0.0:
        noise = rng.gaussians(3 * n).reshape(n, 3)
        pts = pts + spec.noise_sigma * noise
    return PointCloud(pts, labels, num_classes)
