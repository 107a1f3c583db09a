"""Adapters that turn image directories into auglift interchange files.

Each adapter pairs a 2D keypoint detector backend with a depth source backend
and emits exactly what ``auglift augment`` consumes: a detections JSONL, one
PFM depth raster per frame, and a manifest describing the models, the
skeleton mapping, and the metric calibration that produced them.
"""

from .config import AdapterConfig  # noqa: F401
from .export import export_all, export_depth, export_detections, verify_pairing  # noqa: F401

__version__ = "0.1.0"
