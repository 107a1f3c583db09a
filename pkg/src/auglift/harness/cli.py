"""Command-line interface: generate / augment / train / eval / ablate / report.

All subcommands exit 0 on success.  Failures print a single machine-readable
JSON object to stderr ({"error": <type>, "message": <detail>}) and exit 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .. import io as alio
from ..lifter import InputMode, forward, load_params
from ..metrics import evaluate_poses
from ..pipeline import AugLiftConfig
from .config import load_config
from .report import cmd_report
from .runner import (
    RunPaths,
    augment_all_splits,
    augment_dataset_dir,
    cmd_generate,
    load_cell_split,
    run_ablation,
    run_cell,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auglift",
        description="Depth/confidence-augmented 2D-to-3D pose lifting experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate the configured synthetic splits")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="run directory")

    p = sub.add_parser("augment", help="augment a detections+depth dataset to JSONL")
    p.add_argument("--detections", required=True, help="detections JSONL (inside a dataset dir)")
    p.add_argument("--depth-dir", required=True, help="directory of per-frame PFM rasters")
    p.add_argument("--out", required=True, help="output augmented JSONL path")
    p.add_argument("--radius", type=float, default=3.0, help="depth sampling radius, px")
    p.add_argument("--d-max", type=float, default=2.0, help="depth clip upper bound, m")
    p.add_argument("--clip-lower", type=float, default=0.0, help="depth clip lower bound, m")
    p.add_argument("--mean-box-size", type=float, default=None,
                   help="reference box size b-bar; computed from the input when omitted")
    p.add_argument("--no-rescaling", action="store_true", help="disable bbox rescaling")
    p.add_argument("--od-gt", default=None,
                   help="optional ground-truth JSONL; adds a three-way ordinal channel")
    p.add_argument("--od-tau", type=float, default=0.10, help="ordinal threshold, m")

    p = sub.add_parser("train", help="train a single (variant, rescaling, seed) cell")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variant", required=True, help="xy | xyc | xycd | xy_od3")
    p.add_argument("--rescaling", default="on", choices=["on", "off"])
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split of a run")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--rescaling", default="on", choices=["on", "off"])

    p = sub.add_parser("ablate", help="run the full variant/rescaling/seed grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("report", help="render tables and figures for a finished run")
    p.add_argument("--out", required=True, help="run directory")

    return parser


def _do_generate(args) -> int:
    config = load_config(args.config)
    manifests = cmd_generate(config, args.out)
    for name, manifest in manifests.items():
        print(f"{name}: {manifest['n_samples']} samples (seed {manifest['seed']})")
    return 0


def _do_augment(args) -> int:
    detections_path = Path(args.detections)
    dataset_dir = detections_path.parent
    depth_dir = Path(args.depth_dir)

    mean_box = args.mean_box_size
    rescaling = not args.no_rescaling
    if rescaling and mean_box is None:
        frames = alio.read_detections_jsonl(detections_path)
        if frames:
            from ..pipeline import compute_mean_box_size

            mean_box = compute_mean_box_size(f.pose for f in frames)
            print(f"mean box size computed from input: {mean_box:.3f} px", file=sys.stderr)

    cfg = AugLiftConfig(
        radius_r=args.radius,
        d_max=args.d_max,
        clip_lower=args.clip_lower,
        rescaling_enabled=rescaling,
        mean_box_size=mean_box if rescaling else None,
    )
    n = augment_dataset_dir(
        dataset_dir,
        cfg,
        Path(args.out),
        od_tau=args.od_tau if args.od_gt else None,
        error_log=sys.stderr,
        detections_path=detections_path,
        depth_dir=depth_dir,
        gt_path=Path(args.od_gt) if args.od_gt else None,
    )
    print(f"wrote {n} augmented frames to {args.out}")
    return 0


def _do_train(args) -> int:
    config = load_config(args.config)
    if args.rescaling not in config.rescaling_arms:
        config = replace(config, rescaling=args.rescaling)
    variant = InputMode.parse(args.variant)
    paths = RunPaths(Path(args.out))
    cmd_generate(config, paths.root)
    augment_all_splits(config, paths)
    cell = run_cell(config, paths, variant, args.rescaling, args.seed)
    if cell["status"] != "ok":
        raise RuntimeError(f"training failed: {cell.get('error', 'unknown error')}")
    name = paths.cell_name(variant, args.rescaling, args.seed)
    paths.metrics.mkdir(parents=True, exist_ok=True)
    (paths.metrics / f"{name}.json").write_text(
        alio.dumps_canonical(cell) + "\n", encoding="utf-8"
    )
    print(json.dumps(cell["metrics"], indent=2, sort_keys=True))
    return 0


def _do_eval(args) -> int:
    paths = RunPaths(Path(args.out))
    params = load_params(args.checkpoint)
    mode = params.config.input_mode
    manifest = json.loads(
        (paths.split_dir(args.split) / "manifest.json").read_text(encoding="utf-8")
    )
    resolution = manifest["scene"]["resolution"]
    x_eval, gt_eval = load_cell_split(paths, args.rescaling, args.split, mode, resolution)
    k = params.config.joint_count
    preds = forward(params, x_eval, phase="eval").reshape(-1, k, 3)
    preds = preds - preds[:, :1, :]
    report = evaluate_poses(preds, gt_eval).to_dict()
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _do_ablate(args) -> int:
    config = load_config(args.config)
    record = run_ablation(config, args.out, threads=args.threads)
    n_ok = sum(1 for c in record["cells"] if c["status"] == "ok")
    print(f"ablation finished: {n_ok}/{len(record['cells'])} cells ok, "
          f"{record['wall_clock_sec']:.1f}s")
    return 0


def _do_report(args) -> int:
    outputs = cmd_report(args.out)
    print((Path(args.out) / "report.txt").read_text(encoding="utf-8"))
    print(f"csv: {outputs['report_csv']}")
    for fig in outputs["figures"]:
        print(f"figure: {fig}")
    return 0


_HANDLERS = {
    "generate": _do_generate,
    "augment": _do_augment,
    "train": _do_train,
    "eval": _do_eval,
    "ablate": _do_ablate,
    "report": _do_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
