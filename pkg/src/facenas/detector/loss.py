"""Focal classification plus smooth-L1 box regression."""
import numpy as np

from ..autodiff import Tensor, add, scale, sigmoid_focal_loss, smooth_l1
from .matching import match_anchors, regression_targets

FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0
SMOOTH_L1_BETA = 1.0 / 9


def build_targets(anchors, gt_list, threshold):
    """Stack per-image labels: (B, N) 0/1 classes, (B, N, 4) deltas, (B, N) positive mask."""
    labels, deltas, masks = [], [], []
    for gts in gt_list:
        assigned = match_anchors(anchors, gts, threshold)
        t, pos = regression_targets(anchors, gts, assigned)
        labels.append(pos.astype(np.float64))
        deltas.append(t)
        masks.append(pos)
    return np.stack(labels), np.stack(deltas), np.stack(masks)


def detection_loss(class_logits: Tensor, box_deltas: Tensor, labels, box_targets, positive) -> Tensor:
    """(focal over all anchors + smooth-L1 over positives) / max(1, #positives).

    ``class_logits`` is (B, N, 1) or (B, N); ``box_deltas`` is (B, N, 4).
    """
    if not np.isfinite(box_deltas.data).all():
        raise ValueError("box regression produced non-finite values")
    labels = np.asarray(labels).reshape(class_logits.shape)
    npos = max(1.0, float(np.asarray(positive).sum()))
    cls = sigmoid_focal_loss(class_logits, labels, alpha=FOCAL_ALPHA, gamma=FOCAL_GAMMA)
    box = smooth_l1(box_deltas, box_targets, positive, beta=SMOOTH_L1_BETA)
    return scale(add(cls, box), 1.0 / npos)
