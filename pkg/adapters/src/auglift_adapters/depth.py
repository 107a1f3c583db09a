"""Depth source backends.

``png16`` - aligned 16-bit depth PNGs as produced by RGB-D captures (one
            sidecar per image, raw value * unit = meters, 0 = no depth).
            Weights-free; used by the test fixtures.

A backend returns a raw (H, W) float array in meters (before calibration),
with non-positive/missing readings marked NaN; the exporter applies the
affine calibration and substitutes the interchange sentinel.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


class DepthFailure(RuntimeError):
    """No usable depth raster for this frame."""


class Png16Depth:
    """Reads ``<depth_dir>/<image_stem>.png`` as uint16 depth (raw * unit = m)."""

    name = "png16"
    version = "1"

    def __init__(self, depth_dir: str = "depth16", unit: float = 0.001):
        if unit <= 0:
            raise ValueError("unit must be > 0")
        self.depth_dir = depth_dir
        self.unit = float(unit)

    def __call__(self, image_path: Path, image: np.ndarray) -> np.ndarray:
        sidecar = image_path.parent / self.depth_dir / (image_path.stem + ".png")
        if not sidecar.exists():
            raise DepthFailure(f"missing depth sidecar {sidecar}")
        raw = np.asarray(Image.open(sidecar))
        if raw.ndim != 2:
            raise DepthFailure(f"{sidecar}: expected a single-channel depth PNG")
        if raw.shape != image.shape[:2]:
            raise DepthFailure(
                f"{sidecar}: depth resolution {raw.shape} does not match image {image.shape[:2]}"
            )
        depth = raw.astype(np.float64) * self.unit
        depth[raw == 0] = np.nan  # missing readings
        return depth


DEPTH_BACKENDS = {
    "png16": Png16Depth,
}


def make_depth_backend(name: str, params: dict):
    try:
        factory = DEPTH_BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown depth backend {name!r}; available: {sorted(DEPTH_BACKENDS)}"
        ) from None
    return factory(**params)
