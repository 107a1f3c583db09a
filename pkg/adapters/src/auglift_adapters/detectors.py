"""2D keypoint detector backends.

``marker``  - weights-free detector for footage with color-coded joint
              markers (one fixed palette color per joint, in topology order).
              Runs anywhere, used by the test fixtures.
``torchvision-keypointrcnn``
            - Keypoint R-CNN from torchvision (COCO-17), remapped onto the
              17-joint topology.  Requires downloadable weights, so it is an
              optional extra.

A backend returns ``(keypoints (17, 2), confidences (17,))`` for one RGB
image array, or raises ``DetectionFailure`` when no usable person is found.
"""

from __future__ import annotations

import numpy as np

from .mapping import MAPPING_DESCRIPTION, map_coco17_to_topology

# 17 well-separated palette colors, topology (pelvis-first) order
MARKER_PALETTE = np.array(
    [
        (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
        (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
        (210, 245, 60), (250, 190, 190), (0, 128, 128), (170, 110, 40),
        (255, 250, 200), (128, 0, 0), (170, 255, 195), (128, 128, 0),
        (0, 0, 128),
    ],
    dtype=np.int16,
)


class DetectionFailure(RuntimeError):
    """The detector could not produce a usable pose for this frame."""


class MarkerDetector:
    """Centroid detector for palette-colored circular joint markers.

    Confidence is the detected marker area relative to the nominal marker
    area, clamped to [0, 1]; a missing marker yields confidence 0 with the
    keypoint parked at the image center.  A frame where every marker is
    missing fails.
    """

    name = "marker"
    version = "1"
    skeleton_mapping = "identity (marker palette is in topology order)"

    def __init__(self, tolerance: int = 30, marker_radius_px: float = 4.0):
        self.tolerance = int(tolerance)
        self.nominal_area = float(np.pi * marker_radius_px**2)

    def __call__(self, image: np.ndarray):
        if image.ndim != 3 or image.shape[2] < 3:
            raise DetectionFailure("expected an RGB image")
        h, w = image.shape[:2]
        rgb = image[:, :, :3].astype(np.int16)
        keypoints = np.zeros((17, 2))
        conf = np.zeros(17)
        found_any = False
        for j, color in enumerate(MARKER_PALETTE):
            dist = np.abs(rgb - color[None, None, :]).sum(axis=2)
            mask = dist <= self.tolerance
            count = int(mask.sum())
            if count == 0:
                keypoints[j] = ((w - 1) / 2.0, (h - 1) / 2.0)
                continue
            vs, us = np.nonzero(mask)
            keypoints[j] = (us.mean(), vs.mean())
            conf[j] = min(1.0, count / self.nominal_area)
            found_any = True
        if not found_any:
            raise DetectionFailure("no markers found")
        return keypoints, conf


class TorchvisionKeypointRCNN:
    """COCO-17 Keypoint R-CNN remapped to the 17-joint topology.

    Loads pretrained weights on first use; keeps the highest-scoring person.
    """

    name = "torchvision-keypointrcnn"
    skeleton_mapping = MAPPING_DESCRIPTION

    def __init__(self, score_threshold: float = 0.5, device: str = "cpu"):
        import torchvision  # deferred: optional dependency

        self.version = torchvision.__version__
        self.score_threshold = float(score_threshold)
        self._device = device
        self._model = None

    def _ensure_model(self):
        if self._model is None:
            import torch
            from torchvision.models.detection import keypointrcnn_resnet50_fpn

            self._model = keypointrcnn_resnet50_fpn(weights="DEFAULT").to(self._device)
            self._model.eval()
            self._torch = torch

    def __call__(self, image: np.ndarray):
        self._ensure_model()
        torch = self._torch
        tensor = torch.from_numpy(image[:, :, :3].copy()).permute(2, 0, 1).float() / 255.0
        with torch.no_grad():
            out = self._model([tensor.to(self._device)])[0]
        if len(out["scores"]) == 0 or float(out["scores"][0]) < self.score_threshold:
            raise DetectionFailure("no person above the score threshold")
        kp = out["keypoints"][0].cpu().numpy()  # (17, 3): x, y, vis
        scores = out["keypoints_scores"][0].cpu().numpy()
        conf = 1.0 / (1.0 + np.exp(-scores))  # logits -> [0, 1]
        return map_coco17_to_topology(kp[:, :2], conf)


DETECTOR_BACKENDS = {
    "marker": MarkerDetector,
    "torchvision-keypointrcnn": TorchvisionKeypointRCNN,
}


def make_detector(name: str, params: dict):
    try:
        factory = DETECTOR_BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown detector backend {name!r}; available: {sorted(DETECTOR_BACKENDS)}"
        ) from None
    return factory(**params)
