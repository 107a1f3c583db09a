"""Adapter configuration: backend names, parameters, metric calibration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class AdapterConfig:
    """Which detector/depth backend to run and how to calibrate depth.

    ``depth_gain``/``depth_offset`` form the documented affine calibration
    ``meters = gain * raw + offset`` applied to whatever the depth backend
    emits; the identity default matches metric-capable sources.
    """

    detector: str = "marker"
    detector_params: dict = field(default_factory=dict)
    depth: str = "png16"
    depth_params: dict = field(default_factory=dict)
    depth_gain: float = 1.0
    depth_offset: float = 0.0
    image_glob: str = "*.png"

    def __post_init__(self):
        if self.depth_gain <= 0:
            raise ValueError("depth_gain must be > 0")

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "detector_params": dict(self.detector_params),
            "depth": self.depth,
            "depth_params": dict(self.depth_params),
            "depth_gain": self.depth_gain,
            "depth_offset": self.depth_offset,
            "image_glob": self.image_glob,
        }

    @classmethod
    def load(cls, path) -> "AdapterConfig":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**doc)
