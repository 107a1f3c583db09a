"""Fixture: a 10-image marker dataset with aligned 16-bit depth sidecars.

Each image carries one filled circle per joint, colored with the marker
palette in topology order, on a jittered grid so markers never overlap.  The
depth sidecar is millimeter uint16 (RGB-D convention): a smooth background
gradient, a nearer subject disk covering the markers, and a few zero pixels
to exercise the missing-depth path.
"""

import numpy as np
import pytest
from PIL import Image, ImageDraw

from auglift_adapters.detectors import MARKER_PALETTE

IMAGE_SIZE = 128
MARKER_RADIUS = 4
N_FRAMES = 10


def marker_positions(rng) -> np.ndarray:
    """17 well-separated pixel positions on a jittered 5x4 grid."""
    cells = [(cx, cy) for cy in range(4) for cx in range(5)]
    idx = rng.permutation(len(cells))[:17]
    out = np.empty((17, 2))
    for j, ci in enumerate(idx):
        cx, cy = cells[ci]
        out[j, 0] = 16 + cx * 24 + rng.uniform(-4, 4)
        out[j, 1] = 18 + cy * 26 + rng.uniform(-4, 4)
    return out


def render_frame(positions: np.ndarray) -> Image.Image:
    img = Image.new("RGB", (IMAGE_SIZE, IMAGE_SIZE), (24, 24, 24))
    draw = ImageDraw.Draw(img)
    for j, (x, y) in enumerate(positions):
        color = tuple(int(c) for c in MARKER_PALETTE[j])
        draw.ellipse(
            [x - MARKER_RADIUS, y - MARKER_RADIUS, x + MARKER_RADIUS, y + MARKER_RADIUS],
            fill=color,
        )
    return img


def render_depth_mm(positions: np.ndarray, rng) -> np.ndarray:
    vv, uu = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    depth = 3000.0 + 5000.0 * vv / IMAGE_SIZE  # background wall gradient
    center = positions.mean(axis=0)
    subject = (uu - center[0]) ** 2 + (vv - center[1]) ** 2 <= 55.0**2
    depth[subject] = 2000.0 + 300.0 * (vv[subject] - center[1]) / IMAGE_SIZE
    raw = depth.astype(np.uint16)
    # a sprinkling of sensor dropouts
    holes = rng.integers(0, IMAGE_SIZE, size=(12, 2))
    raw[holes[:, 1], holes[:, 0]] = 0
    return raw


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    """(image_dir, per-frame marker positions) for the 10-image fixture."""
    root = tmp_path_factory.mktemp("marker_images")
    depth_dir = root / "depth16"
    depth_dir.mkdir()
    rng = np.random.default_rng(20240817)
    positions = []
    for i in range(N_FRAMES):
        pos = marker_positions(rng)
        positions.append(pos)
        render_frame(pos).save(root / f"frame_{i:03d}.png")
        Image.fromarray(render_depth_mm(pos, rng)).save(depth_dir / f"frame_{i:03d}.png")
    return root, positions
