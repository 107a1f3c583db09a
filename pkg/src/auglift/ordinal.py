"""Ordinal-depth oracle channels: coarse depth bins and three-way labels.

Ground-truth camera-space depths are reduced to root-relative values, then
either bucketed into bins of a fixed granularity (``floor(z / g)``) or into
three classes (in front of / at / behind the root, with a closed interval at
the threshold).  Both reductions can be encoded as an extra per-joint input
channel for the lifting network.

Sign convention: farther from the camera than the root = positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Three-way label codes; the input-channel encoding is the code itself.
FRONT = -1
AT = 0
BEHIND = 1


@dataclass(frozen=True)
class ODConfig:
    """granularity_g: bin width in meters; tau: three-way threshold in meters."""

    granularity_g: float = 0.25
    tau: float = 0.10

    def __post_init__(self):
        if not self.granularity_g > 0:
            raise ValueError("granularity_g must be > 0")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")


def relative_depths(gt_camera_joints, root_index: int = 0) -> np.ndarray:
    """Root-relative Z per joint in meters: z_rel_j = Z_j - Z_root."""
    joints = np.asarray(gt_camera_joints, dtype=np.float64)
    if joints.ndim != 2 or joints.shape[1] != 3:
        raise ValueError("expected (K, 3) camera-space joints")
    if not 0 <= root_index < joints.shape[0]:
        raise ValueError("root_index out of range")
    z = joints[:, 2]
    return z - z[root_index]


def coarse_bins(z_rel, granularity_g: float) -> np.ndarray:
    """Integer bin index floor(z_rel / g) per joint."""
    if not granularity_g > 0:
        raise ValueError("granularity_g must be > 0")
    z = np.asarray(z_rel, dtype=np.float64)
    return np.floor(z / granularity_g).astype(np.int64)


def occupied_bin_count(bins) -> int:
    """Number of distinct bin indices in one frame."""
    bins = np.asarray(bins)
    if bins.size == 0:
        raise ValueError("need at least one joint")
    return int(np.unique(bins).size)


def three_way_labels(z_rel, tau: float) -> np.ndarray:
    """FRONT if z_rel < -tau, AT if |z_rel| <= tau, BEHIND if z_rel > tau."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    z = np.asarray(z_rel, dtype=np.float64)
    labels = np.zeros(z.shape, dtype=np.int8)
    labels[z < -tau] = FRONT
    labels[z > tau] = BEHIND
    return labels


def od_input_channel(labels=None, bins=None, granularity_g: float | None = None) -> np.ndarray:
    """Encode ordinal labels or bins as per-joint input scalars.

    Three-way labels map to {-1, 0, +1}; integer bin indices map to
    ``bin * g`` meters (granularity required in that case).  Exactly one of
    ``labels`` / ``bins`` must be given.
    """
    if (labels is None) == (bins is None):
        raise ValueError("pass exactly one of labels or bins")
    if labels is not None:
        arr = np.asarray(labels, dtype=np.float64)
        if not np.all(np.isin(arr, (FRONT, AT, BEHIND))):
            raise ValueError("labels must be FRONT/AT/BEHIND")
        return arr
    if granularity_g is None:
        raise ValueError("bin encoding requires the granularity")
    if not granularity_g > 0:
        raise ValueError("granularity_g must be > 0")
    return np.asarray(bins, dtype=np.float64) * granularity_g
