"""Dataset generation, augmentation, training cells, and the ablation driver.

A run directory is self-describing:

    config.json            configuration snapshot
    manifests/<split>/     detections.jsonl, gt.jsonl, visibility.jsonl,
                           depth/*.pfm, manifest.json
    augmented/<arm>/       <split>.jsonl + auglift_config.json per rescaling arm
    checkpoints/           one lifter checkpoint per cell
    metrics/               one JSON per cell (metrics per split + loss history)
    run_record.json        aggregates, improvement deltas, cell index
    report.txt/.csv        rendered tables (via the report module)
    figures/               rendered charts (via the report module)

Every artifact containing metric values is a pure function of the
configuration, so rerunning with the same config reproduces identical files.
"""

from __future__ import annotations

import concurrent.futures
import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .. import io as alio
from ..lifter import (
    InputMode,
    TrainingDiverged,
    build_inputs,
    build_targets,
    forward,
    save_params,
    train,
)
from ..metrics import evaluate_poses
from ..ordinal import od_input_channel, three_way_labels
from ..pipeline import AugLiftConfig, augment_frame, compute_mean_box_size
from ..synth import default_body, default_topology, generate_sample
from .config import ExperimentConfig, SplitSpec


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @property
    def config(self) -> Path:
        return self.root / "config.json"

    def split_dir(self, split: str) -> Path:
        return self.root / "manifests" / split

    def augmented_dir(self, arm: str) -> Path:
        return self.root / "augmented" / arm

    @property
    def checkpoints(self) -> Path:
        return self.root / "checkpoints"

    @property
    def metrics(self) -> Path:
        return self.root / "metrics"

    @property
    def run_record(self) -> Path:
        return self.root / "run_record.json"

    @property
    def figures(self) -> Path:
        return self.root / "figures"

    def cell_name(self, variant: InputMode, arm: str, seed: int) -> str:
        return f"{variant.value}_{arm}_s{seed}"


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(alio.dumps_canonical(obj) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Dataset generation
# ---------------------------------------------------------------------------


def split_manifest(spec: SplitSpec, joint_count: int) -> dict:
    return {
        "format": "auglift-dataset",
        "version": 1,
        "split": spec.name,
        "seed": spec.seed,
        "n_samples": spec.n_samples,
        "joint_count": joint_count,
        "scene": spec.scene.to_dict(),
        "files": {
            "detections": "detections.jsonl",
            "ground_truth": "gt.jsonl",
            "visibility": "visibility.jsonl",
            "depth_dir": "depth",
        },
    }


def generate_split(spec: SplitSpec, out_dir: Path, force: bool = False) -> dict:
    """Write one split's dataset; skipped when an identical manifest exists."""
    topology = default_topology()
    body = default_body(topology)
    manifest = split_manifest(spec, topology.joint_count)

    manifest_path = out_dir / "manifest.json"
    if not force and manifest_path.exists():
        existing = json.loads(manifest_path.read_text(encoding="utf-8"))
        if existing == manifest:
            return manifest

    out_dir.mkdir(parents=True, exist_ok=True)
    depth_dir = out_dir / "depth"
    depth_dir.mkdir(exist_ok=True)

    detections, gts, visibilities = [], [], []
    for i in range(spec.n_samples):
        sample = generate_sample(spec.scene, i, topology=topology, body=body)
        detections.append(sample.detection)
        gts.append((i, sample.gt_pose3d_rel))
        visibilities.append((i, sample.visibility))
        alio.write_pfm(depth_dir / f"{i:06d}.pfm", sample.depth)

    alio.write_detections_jsonl(out_dir / "detections.jsonl", detections)
    alio.write_gt_jsonl(out_dir / "gt.jsonl", gts)
    alio.write_visibility_jsonl(out_dir / "visibility.jsonl", visibilities)
    _write_json(manifest_path, manifest)
    return manifest


def cmd_generate(config: ExperimentConfig, out_dir) -> dict[str, dict]:
    """Generate every configured split under the run directory."""
    paths = RunPaths(Path(out_dir))
    paths.root.mkdir(parents=True, exist_ok=True)
    _write_json(paths.config, config.raw)
    manifests = {}
    for name, spec in config.splits.items():
        manifests[name] = generate_split(spec, paths.split_dir(name))
    return manifests


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def augment_dataset_dir(
    dataset_dir: Path,
    cfg: AugLiftConfig,
    out_path: Path,
    od_tau: float | None = None,
    root_index: int = 0,
    error_log=None,
    detections_path: Path | None = None,
    depth_dir: Path | None = None,
    gt_path: Path | None = None,
) -> int:
    """Augment every frame of a dataset directory into a JSONL file.

    Frames whose depth raster is missing or unreadable are skipped and logged
    (one line per frame to ``error_log``).  Returns the number of frames
    written; the output preserves the input order.  The individual file
    locations default to the standard dataset layout but can be overridden.
    """
    dataset_dir = Path(dataset_dir)
    detections_path = detections_path or dataset_dir / "detections.jsonl"
    depth_dir = depth_dir or dataset_dir / "depth"
    gt_path = gt_path or dataset_dir / "gt.jsonl"

    detections = alio.read_detections_jsonl(detections_path)
    od_by_frame = {}
    if od_tau is not None:
        for frame_id, pose in alio.read_gt_jsonl(gt_path):
            z_rel_m = pose.joints[:, 2] / 1000.0
            od_by_frame[frame_id] = od_input_channel(labels=three_way_labels(z_rel_m, od_tau))

    records = []
    for frame in detections:
        pfm_path = depth_dir / f"{frame.frame_id:06d}.pfm"
        try:
            raster = alio.read_pfm(pfm_path)
            aug = augment_frame(frame, raster, cfg, root_index=root_index)
        except (OSError, ValueError) as exc:
            if error_log is not None:
                error_log.write(
                    alio.dumps_canonical(
                        {"frame_id": frame.frame_id, "error": type(exc).__name__, "message": str(exc)}
                    )
                    + "\n"
                )
            continue
        rec = {
            "frame_id": frame.frame_id,
            "subject_id": frame.subject_id,
            "features": [[float(v) for v in row] for row in aug.features],
            "degenerate_bbox": aug.degenerate_bbox,
        }
        if od_tau is not None and frame.frame_id in od_by_frame:
            rec["od"] = [float(v) for v in od_by_frame[frame.frame_id]]
        records.append(rec)

    out_path.parent.mkdir(parents=True, exist_ok=True)
    alio.write_augmented_jsonl(out_path, records)
    return len(records)


def compute_train_mean_box_size(config: ExperimentConfig, paths: RunPaths) -> float:
    detections = alio.read_detections_jsonl(paths.split_dir("train") / "detections.jsonl")
    return compute_mean_box_size(f.pose for f in detections)


def augment_all_splits(config: ExperimentConfig, paths: RunPaths) -> float:
    """Augment every split for every rescaling arm; returns the train b-bar."""
    mean_box = compute_train_mean_box_size(config, paths)
    needs_od = InputMode.XY_OD3 in config.variants
    for arm in config.rescaling_arms:
        cfg = replace(
            config.auglift,
            rescaling_enabled=(arm == "on"),
            mean_box_size=mean_box if arm == "on" else None,
        )
        arm_dir = paths.augmented_dir(arm)
        for split in config.splits:
            augment_dataset_dir(
                paths.split_dir(split),
                cfg,
                arm_dir / f"{split}.jsonl",
                od_tau=config.od.tau if needs_od else None,
            )
        _write_json(
            arm_dir / "auglift_config.json",
            {
                "radius_r": cfg.radius_r,
                "d_max": cfg.d_max,
                "clip_lower": cfg.clip_lower,
                "rescaling_enabled": cfg.rescaling_enabled,
                "mean_box_size": cfg.mean_box_size,
                "train_mean_box_size": mean_box,
            },
        )
    return mean_box


# ---------------------------------------------------------------------------
# Cell data and training
# ---------------------------------------------------------------------------


def load_cell_split(
    paths: RunPaths, arm: str, split: str, mode: InputMode, resolution: int
) -> tuple[np.ndarray, np.ndarray]:
    """(inputs, gt_mm) for one split under one rescaling arm."""
    records = alio.read_augmented_jsonl(paths.augmented_dir(arm) / f"{split}.jsonl")
    gts = dict(alio.read_gt_jsonl(paths.split_dir(split) / "gt.jsonl"))
    feats = np.stack([r["features"] for r in records])
    od = None
    if mode is InputMode.XY_OD3:
        od = np.stack([r["od"] for r in records])
    x = build_inputs(feats, mode, (resolution, resolution), od=od)
    gt = np.stack([gts[r["frame_id"]].joints for r in records])
    return x, gt


def _root_center_batch(preds: np.ndarray, root_index: int = 0) -> np.ndarray:
    return preds - preds[:, root_index : root_index + 1, :]


def run_cell(
    config: ExperimentConfig,
    paths: RunPaths,
    variant: InputMode,
    arm: str,
    seed: int,
) -> dict:
    """Train one (variant, rescaling arm, seed) cell and evaluate all splits."""
    name = paths.cell_name(variant, arm, seed)
    lifter_cfg = replace(config.lifter, input_mode=variant)
    train_cfg = replace(config.train, seed=seed)
    resolution = config.resolution

    x_train, gt_train = load_cell_split(paths, arm, "train", variant, resolution)
    y_train = build_targets(gt_train)

    cell: dict = {"variant": variant.value, "rescaling": arm, "seed": seed}
    try:
        params, history = train(x_train, y_train, lifter_cfg, train_cfg)
    except TrainingDiverged as exc:
        cell.update(status="failed", error=str(exc), metrics={}, history=[])
        return cell

    ckpt = paths.checkpoints / f"{name}.ckpt"
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_params(params, ckpt)

    metrics = {}
    k = lifter_cfg.joint_count
    for split in config.splits:
        x_eval, gt_eval = load_cell_split(paths, arm, split, variant, resolution)
        preds = forward(params, x_eval, phase="eval").reshape(-1, k, 3)
        preds = _root_center_batch(preds)
        metrics[split] = evaluate_poses(preds, gt_eval).to_dict()

    # nothing time-dependent goes into the cell: identical configs must
    # reproduce identical metric files byte for byte
    cell.update(
        status="ok",
        metrics=metrics,
        history=[float(v) for v in history],
        final_train_loss=float(history[-1]),
        checkpoint=str(ckpt.relative_to(paths.root)),
    )
    return cell


def _cell_task(args) -> dict:
    config_doc, root, variant, arm, seed = args
    from .config import parse_config

    config = parse_config(config_doc)
    paths = RunPaths(Path(root))
    return run_cell(config, paths, InputMode.parse(variant), arm, seed)


# ---------------------------------------------------------------------------
# Ablation driver
# ---------------------------------------------------------------------------


def _aggregate(cells: list[dict], config: ExperimentConfig) -> dict:
    """Mean/std per (variant, arm, split) over seeds, from per-seed metrics."""
    agg: dict = {}
    for variant in config.variants:
        for arm in config.rescaling_arms:
            per_split: dict = {}
            ok = [
                c
                for c in cells
                if c["variant"] == variant.value and c["rescaling"] == arm and c["status"] == "ok"
            ]
            if not ok:
                agg.setdefault(variant.value, {})[arm] = per_split
                continue
            for split in config.splits:
                values = {
                    key: np.array([c["metrics"][split][key] for c in ok])
                    for key in ("mpjpe", "p_mpjpe", "pck150", "auc")
                }
                per_split[split] = {
                    "n_seeds": len(ok),
                    "mpjpe_mean": float(values["mpjpe"].mean()),
                    "mpjpe_std": float(values["mpjpe"].std()),
                    "p_mpjpe_mean": float(values["p_mpjpe"].mean()),
                    "pck150_mean": float(values["pck150"].mean()),
                    "auc_mean": float(values["auc"].mean()),
                }
            agg.setdefault(variant.value, {})[arm] = per_split
    return agg


def _deltas(agg: dict, config: ExperimentConfig) -> dict:
    """Improvement percentages: positive = lower error than the reference."""
    out: dict = {"vs_xy": {}, "rescaling": {}}
    baseline = InputMode.XY.value
    for variant in config.variants:
        if variant.value == baseline:
            continue
        for arm in config.rescaling_arms:
            for split in config.splits:
                base = agg.get(baseline, {}).get(arm, {}).get(split)
                cur = agg.get(variant.value, {}).get(arm, {}).get(split)
                if not base or not cur or base["mpjpe_mean"] == 0:
                    continue
                delta = 100.0 * (base["mpjpe_mean"] - cur["mpjpe_mean"]) / base["mpjpe_mean"]
                out["vs_xy"].setdefault(variant.value, {}).setdefault(arm, {})[split] = delta
    if set(config.rescaling_arms) == {"on", "off"}:
        for variant in config.variants:
            for split in config.splits:
                off = agg.get(variant.value, {}).get("off", {}).get(split)
                on = agg.get(variant.value, {}).get("on", {}).get(split)
                if not off or not on or off["mpjpe_mean"] == 0:
                    continue
                delta = 100.0 * (off["mpjpe_mean"] - on["mpjpe_mean"]) / off["mpjpe_mean"]
                out["rescaling"].setdefault(variant.value, {})[split] = delta
    return out


def run_ablation(config: ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Full ablation: generate (if needed), augment, train every cell, aggregate.

    A diverged cell is recorded as failed and the run continues.  Returns the
    run record (also written to ``run_record.json``).
    """
    started = time.monotonic()
    paths = RunPaths(Path(out_dir))
    cmd_generate(config, paths.root)
    mean_box = augment_all_splits(config, paths)

    grid = [
        (variant, arm, seed)
        for variant in config.variants
        for arm in config.rescaling_arms
        for seed in config.seeds
    ]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(
                pool.map(
                    _cell_task,
                    [
                        (config.raw, str(paths.root), variant.value, arm, seed)
                        for variant, arm, seed in grid
                    ],
                )
            )
    else:
        cells = [run_cell(config, paths, variant, arm, seed) for variant, arm, seed in grid]

    paths.metrics.mkdir(parents=True, exist_ok=True)
    for cell in cells:
        name = f"{cell['variant']}_{cell['rescaling']}_s{cell['seed']}"
        _write_json(paths.metrics / f"{name}.json", cell)

    agg = _aggregate(cells, config)
    record = {
        "format": "auglift-run",
        "version": 1,
        "config": config.raw,
        "mean_box_size": mean_box,
        "cells": [
            {k: v for k, v in cell.items() if k not in ("history",)} for cell in cells
        ],
        "aggregates": agg,
        "deltas": _deltas(agg, config),
        "wall_clock_sec": round(time.monotonic() - started, 3),
    }
    _write_json(paths.run_record, record)
    return record


def load_run_record(out_dir) -> dict:
    path = RunPaths(Path(out_dir)).run_record
    if not path.exists():
        raise FileNotFoundError(f"no run record at {path}; run the ablation first")
    return json.loads(path.read_text(encoding="utf-8"))
