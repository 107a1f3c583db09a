"""Batch export of detections and depth rasters in the auglift interchange formats.

Frame ids are the indices of the sorted image list.  Every raster is written
atomically (tmp file + rename); frames whose detector or depth backend fails
are logged and skipped.  The manifest records the backends, their versions,
the skeleton mapping, the affine depth calibration, and per-stage frame
counts, so a downstream run is fully reproducible.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from auglift import io as alio
from auglift.skeleton import INVALID_DEPTH, ConfidenceVec, DetectionFrame, Pose2D

from .config import AdapterConfig
from .depth import DepthFailure, make_depth_backend
from .detectors import DetectionFailure, make_detector

MANIFEST_NAME = "manifest.json"


def list_images(image_dir, pattern: str) -> list[Path]:
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise FileNotFoundError(f"image directory {image_dir} does not exist")
    return sorted(p for p in image_dir.glob(pattern) if p.is_file())


def _load_rgb(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def _write_manifest(out_dir: Path, updates: dict) -> dict:
    path = out_dir / MANIFEST_NAME
    doc = {"format": "auglift-adapter-manifest", "version": 1}
    if path.exists():
        doc = json.loads(path.read_text(encoding="utf-8"))
    doc.update(updates)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return doc


def export_detections(image_dir, out_dir, cfg: AdapterConfig, log=None) -> dict:
    """Run the 2D detector over every image; write detections.jsonl + manifest."""
    log = log if log is not None else sys.stderr
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    detector = make_detector(cfg.detector, cfg.detector_params)
    images = list_images(image_dir, cfg.image_glob)

    frames: list[DetectionFrame] = []
    skipped: list[dict] = []
    for frame_id, path in enumerate(images):
        try:
            keypoints, conf = detector(_load_rgb(path))
            frames.append(
                DetectionFrame(
                    pose=Pose2D(keypoints),
                    conf=ConfidenceVec(np.clip(conf, 0.0, 1.0)),
                    frame_id=frame_id,
                    subject_id=0,
                )
            )
        except DetectionFailure as exc:
            skipped.append({"frame_id": frame_id, "image": path.name, "reason": str(exc)})
            print(f"detect skip frame {frame_id} ({path.name}): {exc}", file=log)

    alio.write_detections_jsonl(out_dir / "detections.jsonl", frames)
    return _write_manifest(
        out_dir,
        {
            "source_dir": str(Path(image_dir).resolve()),
            "detector": {"name": detector.name, "version": detector.version},
            "skeleton_mapping": detector.skeleton_mapping,
            "frame_count_detections": len(frames),
            "skipped_detections": skipped,
        },
    )


def export_depth(image_dir, out_dir, cfg: AdapterConfig, log=None) -> dict:
    """Run the depth backend over every image; write one PFM per frame + manifest."""
    log = log if log is not None else sys.stderr
    out_dir = Path(out_dir)
    depth_dir = out_dir / "depth"
    depth_dir.mkdir(parents=True, exist_ok=True)
    backend = make_depth_backend(cfg.depth, cfg.depth_params)
    images = list_images(image_dir, cfg.image_glob)

    written = 0
    skipped: list[dict] = []
    for frame_id, path in enumerate(images):
        try:
            image = _load_rgb(path)
            raw = backend(path, image)
            meters = cfg.depth_gain * raw + cfg.depth_offset
            meters = np.where(np.isfinite(meters) & (meters > 0), meters, INVALID_DEPTH)
            target = depth_dir / f"{frame_id:06d}.pfm"
            tmp = target.with_suffix(".pfm.tmp")
            alio.write_pfm(tmp, meters.astype(np.float32))
            os.replace(tmp, target)
            written += 1
        except (DepthFailure, OSError, ValueError) as exc:
            skipped.append({"frame_id": frame_id, "image": path.name, "reason": str(exc)})
            print(f"depth skip frame {frame_id} ({path.name}): {exc}", file=log)

    return _write_manifest(
        out_dir,
        {
            "source_dir": str(Path(image_dir).resolve()),
            "depth_model": {"name": backend.name, "version": backend.version},
            "calibration": {"gain": cfg.depth_gain, "offset": cfg.depth_offset},
            "frame_count_depth": written,
            "skipped_depth": skipped,
        },
    )


def verify_pairing(out_dir) -> list[str]:
    """Check the manifest invariant: every emitted frame has both a detection
    line and a depth raster file.  Returns the list of problems."""
    out_dir = Path(out_dir)
    problems = []
    det_path = out_dir / "detections.jsonl"
    if not det_path.exists():
        return [f"missing {det_path}"]
    det_ids = {f.frame_id for f in alio.read_detections_jsonl(det_path)}
    depth_ids = {int(p.stem) for p in (out_dir / "depth").glob("*.pfm")}
    for fid in sorted(det_ids - depth_ids):
        problems.append(f"frame {fid}: detection without depth raster")
    for fid in sorted(depth_ids - det_ids):
        problems.append(f"frame {fid}: depth raster without detection")
    return problems


def export_all(image_dir, out_dir, cfg: AdapterConfig, log=None) -> dict:
    """Detections + depth + pairing check; the paired dataset feeds cmd_augment."""
    export_detections(image_dir, out_dir, cfg, log=log)
    manifest = export_depth(image_dir, out_dir, cfg, log=log)
    problems = verify_pairing(out_dir)
    manifest = _write_manifest(Path(out_dir), {"pairing_problems": problems})
    return manifest
