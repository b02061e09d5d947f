"""Single-stage anchor-based face detector built on the autodiff core."""
from .anchors import anchor_size, feature_shapes_for, generate_anchors
from .boxes import decode, encode, iou, iou_matrix
from .config import DetectorConfig
from .loss import build_targets, detection_loss
from .matching import match_anchors
from .model import Backbone, Detector, head_specs, images_to_input
from .postprocess import Detection, decode_and_nms, nms

__all__ = [
    "Backbone", "Detection", "Detector", "DetectorConfig", "anchor_size", "build_targets", "decode",
    "decode_and_nms", "detection_loss", "encode", "feature_shapes_for", "generate_anchors", "head_specs",
    "images_to_input", "iou", "iou_matrix", "match_anchors", "nms",
]
