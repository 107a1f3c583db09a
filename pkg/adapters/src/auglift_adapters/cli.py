"""CLI: export-detections / export-depth / export-all over an image directory."""

from __future__ import annotations

import argparse
import json
import sys

from .config import AdapterConfig
from .export import export_all, export_depth, export_detections


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auglift-adapters",
        description="Export detections JSONL and PFM depth rasters from images",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("export-detections", "export-depth", "export-all"):
        p = sub.add_parser(name)
        p.add_argument("--images", required=True, help="source image directory")
        p.add_argument("--out", required=True, help="output dataset directory")
        p.add_argument("--config", default=None, help="adapter config JSON")
        p.add_argument("--detector", default=None, help="detector backend override")
        p.add_argument("--depth", default=None, help="depth backend override")
        p.add_argument("--gain", type=float, default=None, help="depth calibration gain")
        p.add_argument("--offset", type=float, default=None, help="depth calibration offset")
    return parser


def _config_from_args(args) -> AdapterConfig:
    cfg = AdapterConfig.load(args.config) if args.config else AdapterConfig()
    overrides = {}
    if args.detector:
        overrides["detector"] = args.detector
    if args.depth:
        overrides["depth"] = args.depth
    if args.gain is not None:
        overrides["depth_gain"] = args.gain
    if args.offset is not None:
        overrides["depth_offset"] = args.offset
    if overrides:
        cfg = AdapterConfig(**{**cfg.to_dict(), **overrides})
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config_from_args(args)
    try:
        if args.command == "export-detections":
            manifest = export_detections(args.images, args.out, cfg)
            print(f"detections: {manifest['frame_count_detections']} frames")
        elif args.command == "export-depth":
            manifest = export_depth(args.images, args.out, cfg)
            print(f"depth rasters: {manifest['frame_count_depth']} frames")
        else:
            manifest = export_all(args.images, args.out, cfg)
            problems = manifest.get("pairing_problems", [])
            print(
                f"detections: {manifest['frame_count_detections']}, "
                f"depth rasters: {manifest['frame_count_depth']}, "
                f"pairing problems: {len(problems)}"
            )
            if problems:
                return 2
        return 0
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
