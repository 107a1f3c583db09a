"""Interchange formats: detections/ground-truth/augmented JSONL, PFM depth maps.

These files are the contract between the synthetic generator, the augmentation
CLI, and any external adapter feeding real data in:

* detections JSONL: one frame per line,
  ``{"frame_id": int, "subject_id": int, "keypoints": [[x, y, c], ...K]}``
* ground-truth JSONL: ``{"frame_id": int, "joints_mm": [[X, Y, Z], ...K]}``
  (root-relative millimeters)
* augmented JSONL: ``{"frame_id", "subject_id", "features": [[x, y, c, d],
  ...K], "degenerate_bbox": bool}`` with an optional ``"od"`` list of K
  scalars when an ordinal-depth channel is active
* depth rasters: Portable FloatMap (``Pf``), little-endian (scale -1.0),
  rows stored bottom-to-top per the PFM convention.

All JSON written here is key-sorted with compact separators so identical data
produces identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .skeleton import ConfidenceVec, DepthRaster, DetectionFrame, Pose2D, Pose3D


def dumps_canonical(obj) -> str:
    """Deterministic JSON encoding (sorted keys, compact separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


# ---------------------------------------------------------------------------
# JSONL
# ---------------------------------------------------------------------------


def write_detections_jsonl(path, frames: Iterable[DetectionFrame]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for frame in frames:
            rec = {
                "frame_id": int(frame.frame_id),
                "subject_id": int(frame.subject_id),
                "keypoints": [
                    [float(x), float(y), float(c)]
                    for (x, y), c in zip(frame.pose.coords, frame.conf.values)
                ],
            }
            fh.write(dumps_canonical(rec) + "\n")


def read_detections_jsonl(path) -> list[DetectionFrame]:
    frames = []
    for lineno, rec in _iter_jsonl(path):
        try:
            kps = np.asarray(rec["keypoints"], dtype=np.float64)
            if kps.ndim != 2 or kps.shape[1] != 3:
                raise ValueError(f"keypoints must be K x [x, y, c], got shape {kps.shape}")
            frames.append(
                DetectionFrame(
                    pose=Pose2D(kps[:, :2]),
                    conf=ConfidenceVec(kps[:, 2]),
                    frame_id=int(rec["frame_id"]),
                    subject_id=int(rec.get("subject_id", 0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: invalid detection record: {exc}") from exc
    return frames


def write_gt_jsonl(path, poses: Iterable[tuple[int, Pose3D]]) -> None:
    """Write (frame_id, root-relative Pose3D in mm) records."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for frame_id, pose in poses:
            rec = {
                "frame_id": int(frame_id),
                "joints_mm": [[float(v) for v in row] for row in pose.joints],
            }
            fh.write(dumps_canonical(rec) + "\n")


def read_gt_jsonl(path) -> list[tuple[int, Pose3D]]:
    out = []
    for lineno, rec in _iter_jsonl(path):
        try:
            joints = np.asarray(rec["joints_mm"], dtype=np.float64)
            out.append((int(rec["frame_id"]), Pose3D(joints)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: invalid ground-truth record: {exc}") from exc
    return out


def write_augmented_jsonl(path, records: Iterable[dict]) -> None:
    """Write augmented-feature records (as produced by the harness)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_canonical(rec) + "\n")


def read_augmented_jsonl(path) -> list[dict]:
    out = []
    for lineno, rec in _iter_jsonl(path):
        try:
            feats = np.asarray(rec["features"], dtype=np.float64)
            if feats.ndim != 2 or feats.shape[1] != 4:
                raise ValueError(f"features must be K x 4, got shape {feats.shape}")
            parsed = {
                "frame_id": int(rec["frame_id"]),
                "subject_id": int(rec.get("subject_id", 0)),
                "features": feats,
                "degenerate_bbox": bool(rec.get("degenerate_bbox", False)),
            }
            if "od" in rec:
                parsed["od"] = np.asarray(rec["od"], dtype=np.float64)
            out.append(parsed)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: invalid augmented record: {exc}") from exc
    return out


def write_visibility_jsonl(path, records: Iterable[tuple[int, np.ndarray]]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for frame_id, visible in records:
            rec = {"frame_id": int(frame_id), "visible": [bool(v) for v in visible]}
            fh.write(dumps_canonical(rec) + "\n")


def read_visibility_jsonl(path) -> list[tuple[int, np.ndarray]]:
    return [
        (int(rec["frame_id"]), np.asarray(rec["visible"], dtype=bool))
        for _, rec in _iter_jsonl(path)
    ]


def _iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(rec, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, rec


# ---------------------------------------------------------------------------
# PFM
# ---------------------------------------------------------------------------


def write_pfm(path, raster: DepthRaster | np.ndarray) -> None:
    """Write a grayscale PFM (little-endian, scale -1.0, bottom-to-top rows)."""
    data = raster.data if isinstance(raster, DepthRaster) else np.asarray(raster, np.float32)
    if data.ndim != 2:
        raise ValueError("PFM writer expects a 2-D array")
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        flipped = np.ascontiguousarray(np.flipud(data.astype("<f4")))
        fh.write(flipped.tobytes())


def read_pfm(path) -> DepthRaster:
    """Read a grayscale PFM into a DepthRaster (NaNs rejected)."""
    arr = read_pfm_array(path)
    return DepthRaster(arr)


def read_pfm_array(path) -> np.ndarray:
    """Read a grayscale PFM as a raw (H, W) float32 array, top-to-bottom rows."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM (magic {magic!r})")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise ValueError(f"{path}: malformed PFM dimension line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        endian = "<" if scale < 0 else ">"
        payload = fh.read(4 * w * h)
        if len(payload) != 4 * w * h:
            raise ValueError(f"{path}: truncated PFM payload")
        flat = np.frombuffer(payload, dtype=endian + "f4")
    return np.flipud(flat.reshape(h, w)).copy()


# ---------------------------------------------------------------------------
# Schema validation
# ---------------------------------------------------------------------------


def validate_detections_file(path, joint_count: int = 17) -> list[str]:
    """Return a list of problems (empty when the file is valid)."""
    errors = []
    seen = set()
    try:
        frames = read_detections_jsonl(path)
    except ValueError as exc:
        return [str(exc)]
    for frame in frames:
        if frame.joint_count != joint_count:
            errors.append(f"frame {frame.frame_id}: expected K={joint_count}, got {frame.joint_count}")
        if frame.frame_id in seen:
            errors.append(f"frame {frame.frame_id}: duplicate frame_id")
        seen.add(frame.frame_id)
    return errors


def validate_gt_file(path, joint_count: int = 17) -> list[str]:
    errors = []
    try:
        poses = read_gt_jsonl(path)
    except ValueError as exc:
        return [str(exc)]
    for frame_id, pose in poses:
        if pose.joint_count != joint_count:
            errors.append(f"frame {frame_id}: expected K={joint_count}, got {pose.joint_count}")
    return errors


def validate_augmented_file(
    path,
    joint_count: int = 17,
    d_max: float = 2.0,
    clip_lower: float = 0.0,
    root_index: int = 0,
) -> list[str]:
    """Check every line against the augmented-feature invariants."""
    tol = 1e-9
    errors = []
    try:
        records = read_augmented_jsonl(path)
    except ValueError as exc:
        return [str(exc)]
    for rec in records:
        fid = rec["frame_id"]
        feats = rec["features"]
        if feats.shape[0] != joint_count:
            errors.append(f"frame {fid}: expected K={joint_count}, got {feats.shape[0]}")
            continue
        if not np.all(np.isfinite(feats)):
            errors.append(f"frame {fid}: non-finite features")
        c, d = feats[:, 2], feats[:, 3]
        if np.any(c < -1 - tol) or np.any(c > 1 + tol):
            errors.append(f"frame {fid}: confidence channel outside [-1, 1]")
        if np.any(d < clip_lower - tol) or np.any(d > d_max + tol):
            errors.append(f"frame {fid}: depth channel outside [{clip_lower}, {d_max}]")
        if clip_lower == 0.0 and abs(d[root_index]) > tol:
            errors.append(f"frame {fid}: root depth is {d[root_index]}, expected 0")
    return errors


def validate_pfm_file(path) -> list[str]:
    try:
        read_pfm(path)
    except ValueError as exc:
        return [str(exc)]
    return []
