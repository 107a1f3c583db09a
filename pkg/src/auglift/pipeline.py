"""Keypoint augmentation pipeline: depth sampling, bbox rescaling, normalization.

Turns a (DetectionFrame, DepthRaster) pair into an :class:`AugmentedPose` with
per-joint (x, y, c, d) features:

1. sample a robust per-keypoint depth as the minimum over a small pixel disk,
2. rescale the 2D keypoints so the keypoint bounding box matches a reference
   size (computed on the training set),
3. map confidence to [-1, 1] and depth to clipped root-relative meters.

Depth is sampled on the original pixel coordinates, before rescaling, because
rescaled coordinates no longer index the image.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .skeleton import AugmentedPose, ConfidenceVec, DepthRaster, DetectionFrame, Pose2D


@dataclass(frozen=True)
class AugLiftConfig:
    """Parameters of the augmentation pipeline.

    radius_r: pixel radius of the depth-sampling disk.
    d_max: upper clip for root-relative depth, meters.
    mean_box_size: reference box size (mean over the training set), pixels;
        required when rescaling is enabled.
    clip_lower: lower clip for root-relative depth (0 by default; may be set
        negative to keep front-of-root ordering).
    """

    radius_r: float = 3.0
    d_max: float = 2.0
    mean_box_size: float | None = None
    rescaling_enabled: bool = True
    clip_lower: float = 0.0

    def __post_init__(self):
        if self.radius_r < 0:
            raise ValueError("radius_r must be >= 0")
        if not self.d_max > 0:
            raise ValueError("d_max must be > 0")
        if not self.d_max > self.clip_lower:
            raise ValueError("d_max must exceed clip_lower")
        if self.rescaling_enabled and self.mean_box_size is not None and not self.mean_box_size > 0:
            raise ValueError("mean_box_size must be > 0 when rescaling is enabled")


@lru_cache(maxsize=32)
def _disk_offsets(radius: float) -> np.ndarray:
    """Integer (du, dv) offsets with Euclidean norm <= radius, shape (M, 2)."""
    r_int = int(np.floor(radius))
    rng = np.arange(-r_int, r_int + 1)
    du, dv = np.meshgrid(rng, rng, indexing="ij")
    mask = du * du + dv * dv <= radius * radius
    return np.stack([du[mask], dv[mask]], axis=1)


def sample_keypoint_depth(raster: DepthRaster, keypoint, radius: float) -> float:
    """Minimum raster depth over the pixel disk of given radius around a keypoint.

    The keypoint is rounded to the nearest pixel first; if that pixel falls
    outside the raster it is clamped to the nearest border pixel. The disk is
    then intersected with the raster bounds, which always leaves at least the
    center pixel.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    x, y = float(keypoint[0]), float(keypoint[1])
    h, w = raster.data.shape
    u0 = int(np.clip(np.rint(x), 0, w - 1))
    v0 = int(np.clip(np.rint(y), 0, h - 1))
    offs = _disk_offsets(float(radius))
    uu = offs[:, 0] + u0
    vv = offs[:, 1] + v0
    keep = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
    return float(raster.data[vv[keep], uu[keep]].min())


def sample_frame_depths(raster: DepthRaster, pose: Pose2D, radius: float) -> np.ndarray:
    """sample_keypoint_depth for every keypoint of a frame, shape (K,)."""
    return np.array([sample_keypoint_depth(raster, kp, radius) for kp in pose.coords])


def compute_bbox_stats(pose: Pose2D) -> tuple[np.ndarray, float]:
    """Keypoint centroid and box size b = ((max_x - min_x) + (max_y - min_y)) / 2.

    b == 0 (all keypoints coincident) marks a degenerate frame; callers decide
    how to handle it.
    """
    coords = pose.coords
    if coords.shape[0] < 2:
        raise ValueError("need at least 2 keypoints for bbox stats")
    centroid = coords.mean(axis=0)
    extent = coords.max(axis=0) - coords.min(axis=0)
    return centroid, float(0.5 * (extent[0] + extent[1]))


def rescale_pose(pose: Pose2D, mean_box_size: float) -> tuple[Pose2D, bool]:
    """Scale keypoints about their centroid so the box size becomes mean_box_size.

    Returns (rescaled pose, degenerate flag). A degenerate frame (box size 0)
    is passed through unscaled with the flag set, so one bad detection cannot
    abort a batch.
    """
    if not mean_box_size > 0:
        raise ValueError("mean_box_size must be > 0")
    centroid, b = compute_bbox_stats(pose)
    if b == 0.0:
        return pose, True
    s = mean_box_size / b
    return Pose2D(s * (pose.coords - centroid) + centroid), False


def compute_mean_box_size(poses: Iterable[Pose2D]) -> float:
    """Arithmetic mean of box sizes over all non-degenerate frames."""
    sizes = []
    for pose in poses:
        _, b = compute_bbox_stats(pose)
        if b > 0:
            sizes.append(b)
    if not sizes:
        raise ValueError("no non-degenerate frames to compute a mean box size from")
    return float(np.mean(sizes))


def normalize_confidence(conf: ConfidenceVec | Sequence[float]) -> np.ndarray:
    """Affine map of [0, 1] confidences onto [-1, 1]: c -> 2c - 1."""
    if not isinstance(conf, ConfidenceVec):
        conf = ConfidenceVec(np.asarray(conf, dtype=np.float64))
    return 2.0 * conf.values - 1.0


def normalize_depths(
    depths,
    root_index: int,
    d_max: float,
    clip_lower: float = 0.0,
) -> np.ndarray:
    """Root-relative depths clipped to [clip_lower, d_max], meters.

    With the default clip_lower of 0 the root's normalized depth is exactly 0.
    """
    if not d_max > clip_lower:
        raise ValueError("d_max must exceed clip_lower")
    d = np.asarray(depths, dtype=np.float64)
    if not 0 <= root_index < d.shape[0]:
        raise ValueError(f"root_index {root_index} out of range")
    return np.clip(d - d[root_index], clip_lower, d_max)


def augment_frame(
    frame: DetectionFrame,
    raster: DepthRaster,
    cfg: AugLiftConfig,
    root_index: int = 0,
) -> AugmentedPose:
    """Full augmentation of one frame: depth sampling, rescaling, normalization.

    Deterministic: identical inputs produce bit-identical outputs.
    """
    if cfg.rescaling_enabled and cfg.mean_box_size is None:
        raise ValueError("rescaling is enabled but mean_box_size is not set")

    depths = sample_frame_depths(raster, frame.pose, cfg.radius_r)

    if cfg.rescaling_enabled:
        pose, degenerate = rescale_pose(frame.pose, cfg.mean_box_size)
    else:
        pose, degenerate = frame.pose, False

    c_norm = normalize_confidence(frame.conf)
    d_norm = normalize_depths(depths, root_index, cfg.d_max, cfg.clip_lower)

    features = np.column_stack([pose.coords[:, 0], pose.coords[:, 1], c_norm, d_norm])
    return AugmentedPose(features, degenerate_bbox=degenerate)
