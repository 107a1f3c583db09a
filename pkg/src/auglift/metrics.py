"""Pose error metrics: MPJPE, Procrustes-aligned MPJPE, 3DPCK, AUC.

All metrics operate on root-relative joint positions in millimeters and a
fixed joint count K.  P-MPJPE aligns the prediction onto the ground truth
with the optimal similarity transform (translation, uniform scale, rotation
with reflection correction) before measuring, so it can only reduce error.
AUC is the mean PCK over thresholds 5, 10, ..., 150 mm unless a different
ladder is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .skeleton import Pose3D

DEFAULT_AUC_THRESHOLDS_MM = tuple(float(t) for t in range(5, 155, 5))


@dataclass(frozen=True)
class MetricReport:
    mpjpe: float
    p_mpjpe: float
    pck150: float
    auc: float
    n_frames: int

    def __post_init__(self):
        if self.mpjpe < 0 or self.p_mpjpe < 0:
            raise ValueError("errors must be non-negative")
        if self.p_mpjpe > self.mpjpe + 1e-9:
            raise ValueError("p_mpjpe cannot exceed mpjpe")
        if not (0 <= self.pck150 <= 1 and 0 <= self.auc <= 1):
            raise ValueError("pck150 and auc must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def _joints(pose) -> np.ndarray:
    arr = pose.joints if isinstance(pose, Pose3D) else np.asarray(pose, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected (K, 3) joints, got shape {arr.shape}")
    return np.asarray(arr, dtype=np.float64)


def _paired(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    p, g = _joints(pred), _joints(gt)
    if p.shape != g.shape:
        raise ValueError(f"joint count mismatch: {p.shape} vs {g.shape}")
    return p, g


def mpjpe(pred, gt) -> float:
    """Mean Euclidean joint distance in mm."""
    p, g = _paired(pred, gt)
    return float(np.linalg.norm(p - g, axis=1).mean())


def similarity_align(pred, gt) -> np.ndarray:
    """Least-squares similarity alignment (translation, scale, rotation) of pred onto gt.

    Rotation comes from the SVD of the centered cross-covariance with the
    reflection corrected (determinant forced positive).  Raises on degenerate
    ground truth (fewer than 3 joints or all joints collinear).
    """
    p, g = _paired(pred, gt)
    k = p.shape[0]
    if k < 3:
        raise ValueError("similarity alignment needs K >= 3")
    mu_p, mu_g = p.mean(axis=0), g.mean(axis=0)
    pc, gc = p - mu_p, g - mu_g

    sv_g = np.linalg.svd(gc, compute_uv=False)
    if sv_g[1] <= 1e-12 * max(sv_g[0], 1.0):
        raise ValueError("degenerate ground truth: joints are collinear")

    cov = pc.T @ gc
    u, s, vt = np.linalg.svd(cov)
    sign = np.sign(np.linalg.det(u @ vt))
    if sign == 0:
        sign = 1.0
    d = np.ones(3)
    d[-1] = sign
    rot = (u * d) @ vt

    denom = float((pc**2).sum())
    if denom <= 0:
        # all predicted joints coincide; only translation can help
        return np.broadcast_to(mu_g, p.shape).copy()
    scale = float((s * d).sum()) / denom
    return scale * (pc @ rot) + mu_g


def p_mpjpe(pred, gt) -> float:
    """MPJPE after optimal similarity alignment of pred onto gt."""
    aligned = similarity_align(pred, gt)
    return mpjpe(aligned, gt)


def pck(pred, gt, threshold_mm: float = 150.0) -> float:
    """Fraction of joints with error <= threshold."""
    p, g = _paired(pred, gt)
    dists = np.linalg.norm(p - g, axis=1)
    return float((dists <= threshold_mm).mean())


def auc(pred, gt, thresholds_mm=DEFAULT_AUC_THRESHOLDS_MM) -> float:
    """Mean PCK over an ascending ladder of thresholds."""
    thresholds = np.asarray(thresholds_mm, dtype=np.float64)
    if thresholds.size == 0:
        raise ValueError("thresholds must be non-empty")
    if np.any(np.diff(thresholds) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    p, g = _paired(pred, gt)
    dists = np.linalg.norm(p - g, axis=1)
    return float((dists[None, :] <= thresholds[:, None]).mean())


def evaluate_poses(preds: np.ndarray, gts: np.ndarray) -> MetricReport:
    """Aggregate metrics over N frames of (K, 3) root-relative mm poses.

    MPJPE/PCK/AUC pool all joints; P-MPJPE aligns each frame independently
    and averages the per-frame results.
    """
    preds = np.asarray(preds, dtype=np.float64)
    gts = np.asarray(gts, dtype=np.float64)
    if preds.shape != gts.shape or preds.ndim != 3 or preds.shape[2] != 3:
        raise ValueError(f"expected matching (N, K, 3) arrays, got {preds.shape} vs {gts.shape}")
    n = preds.shape[0]
    if n == 0:
        raise ValueError("cannot evaluate zero frames")

    dists = np.linalg.norm(preds - gts, axis=2)
    thresholds = np.asarray(DEFAULT_AUC_THRESHOLDS_MM)
    report = MetricReport(
        mpjpe=float(dists.mean()),
        p_mpjpe=float(np.mean([p_mpjpe(preds[i], gts[i]) for i in range(n)])),
        pck150=float((dists <= 150.0).mean()),
        auc=float((dists[None, :, :] <= thresholds[:, None, None]).mean()),
        n_frames=n,
    )
    return report
