"""Shared domain types: skeleton topology, poses, confidences, depth rasters, camera.

Conventions used throughout the package:

* Pixel coordinates: ``x`` = column, ``y`` = row, origin at the top-left of the
  image, integer pixel centers (pixel ``(0, 0)`` is centered at ``x=0, y=0``).
* Depth rasters are metric, in meters.  Pixels with no surface carry the
  sentinel :data:`INVALID_DEPTH` (largest finite float32).
* 3D poses used for training targets and metrics are root-relative and in
  millimeters; the synthetic generator works in camera-space meters and
  converts at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Sentinel depth for pixels where no geometry was hit. Finite and positive so
# it survives the raster invariants, huge so neighborhood-min never picks it
# over a real surface.
INVALID_DEPTH = float(np.finfo(np.float32).max)

# Default 17-joint topology, pelvis-rooted. The ordering below is a documented
# convention of this package (index 0 = pelvis), not a dataset fact.
JOINT_NAMES_17 = (
    "pelvis",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "spine",
    "thorax",
    "neck",
    "head",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
)

PARENT_INDEX_17 = (-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15)


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SkeletonTopology:
    """Joint names plus a parent tree rooted at ``root_index``."""

    joint_names: tuple[str, ...]
    parent_index: tuple[int, ...]
    root_index: int = 0

    def __post_init__(self):
        k = len(self.joint_names)
        if len(self.parent_index) != k:
            raise ValueError("joint_names and parent_index must have the same length")
        roots = [i for i, p in enumerate(self.parent_index) if p == -1]
        if roots != [self.root_index]:
            raise ValueError(f"exactly one parent of -1 expected at root_index, got roots {roots}")
        # every joint must reach the root without cycles
        for j in range(k):
            seen = set()
            cur = j
            while cur != self.root_index:
                if cur in seen or not (0 <= cur < k):
                    raise ValueError(f"parent graph is not a tree (joint {j})")
                seen.add(cur)
                cur = self.parent_index[cur]

    @property
    def joint_count(self) -> int:
        return len(self.joint_names)

    def bones(self) -> list[tuple[int, int]]:
        """(parent, child) pairs, one per non-root joint."""
        return [(p, j) for j, p in enumerate(self.parent_index) if p != -1]


def default_topology() -> SkeletonTopology:
    return SkeletonTopology(JOINT_NAMES_17, PARENT_INDEX_17, root_index=0)


@dataclass(frozen=True)
class Pose2D:
    """K 2D keypoints in pixels, shape (K, 2)."""

    coords: np.ndarray

    def __post_init__(self):
        coords = _readonly(self.coords)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must have shape (K, 2), got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("keypoint coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def joint_count(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class ConfidenceVec:
    """K detector confidences, each in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim != 1:
            raise ValueError("confidence vector must be 1-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("confidences must be finite")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("confidences must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    @property
    def joint_count(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DetectionFrame:
    """One detector output frame: keypoints with confidences."""

    pose: Pose2D
    conf: ConfidenceVec
    frame_id: int
    subject_id: int = 0

    def __post_init__(self):
        if self.pose.joint_count != self.conf.joint_count:
            raise ValueError("pose and confidence joint counts differ")

    @property
    def joint_count(self) -> int:
        return self.pose.joint_count


@dataclass(frozen=True)
class DepthRaster:
    """Dense per-pixel metric depth, meters, shape (height, width), float32.

    All values must be finite and > 0.  No-surface pixels use INVALID_DEPTH.
    NaNs are rejected here, i.e. at load/construction time.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 2 or data.size == 0:
            raise ValueError(f"depth raster must be non-empty 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("depth raster contains NaN/inf values")
        if np.any(data <= 0.0):
            raise ValueError("depth raster values must be > 0")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Pose3D:
    """K root-relative 3D joints in millimeters, shape (K, 3)."""

    joints: np.ndarray

    def __post_init__(self):
        joints = _readonly(self.joints)
        if joints.ndim != 2 or joints.shape[1] != 3:
            raise ValueError(f"joints must have shape (K, 3), got {joints.shape}")
        if not np.all(np.isfinite(joints)):
            raise ValueError("3D joints must be finite")
        object.__setattr__(self, "joints", joints)

    @property
    def joint_count(self) -> int:
        return self.joints.shape[0]


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal length and principal point in pixels."""

    focal: float
    principal_point: tuple[float, float]
    resolution: tuple[int, int]  # (width, height)

    def __post_init__(self):
        if not self.focal > 0:
            raise ValueError("focal length must be > 0")
        cx, cy = self.principal_point
        w, h = self.resolution
        if not (-0.5 <= cx <= w - 0.5 and -0.5 <= cy <= h - 0.5):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class AugmentedPose:
    """Per-joint (x, y, c, d) feature rows, shape (K, 4).

    x, y are pixels (possibly bbox-rescaled), c is normalized confidence in
    [-1, 1], d is clipped root-relative depth in meters.
    """

    features: np.ndarray
    degenerate_bbox: bool = False

    def __post_init__(self):
        features = _readonly(self.features)
        if features.ndim != 2 or features.shape[1] != 4:
            raise ValueError(f"features must have shape (K, 4), got {features.shape}")
        if not np.all(np.isfinite(features)):
            raise ValueError("augmented features must be finite")
        c = features[:, 2]
        if np.any(c < -1.0 - 1e-12) or np.any(c > 1.0 + 1e-12):
            raise ValueError("normalized confidence must lie in [-1, 1]")
        object.__setattr__(self, "features", features)

    @property
    def joint_count(self) -> int:
        return self.features.shape[0]


def project_point(p, cam: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of a 3D camera-space point to pixel coordinates.

    (u, v) = (cx + focal * X / Z, cy + focal * Y / Z).  Rejects Z <= 0.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError("point must be a 3-vector")
    if not p[2] > 0:
        raise ValueError(f"point is behind the camera (Z={p[2]})")
    cx, cy = cam.principal_point
    return np.array([cx + cam.focal * p[0] / p[2], cy + cam.focal * p[1] / p[2]])


def project_points(points: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Vectorized pinhole projection, points shape (N, 3) with all Z > 0."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must have shape (N, 3)")
    if np.any(points[:, 2] <= 0):
        raise ValueError("all points must be in front of the camera")
    cx, cy = cam.principal_point
    uv = np.empty((points.shape[0], 2))
    uv[:, 0] = cx + cam.focal * points[:, 0] / points[:, 2]
    uv[:, 1] = cy + cam.focal * points[:, 1] / points[:, 2]
    return uv


def root_center(joints, root_index: int = 0) -> Pose3D:
    """Subtract the root joint from every joint; output root is the origin.

    Units pass through unchanged (callers feed millimeters for Pose3D use).
    """
    arr = joints.joints if isinstance(joints, Pose3D) else np.asarray(joints, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError("expected (K, 3) joints")
    if not 0 <= root_index < arr.shape[0]:
        raise ValueError(f"root_index {root_index} out of range for K={arr.shape[0]}")
    return Pose3D(arr - arr[root_index])
