"""Anchor-to-ground-truth assignment."""
import numpy as np

from .boxes import encode, iou_matrix


def match_anchors(anchors, gts, threshold: float = 0.4, low_quality: bool = True) -> np.ndarray:
    """Index of the assigned ground truth per anchor, -1 for negatives.

    An anchor is positive when its best IoU reaches ``threshold`` (ties go to
    the lowest gt index). With ``low_quality`` every gt additionally claims its
    single best anchor (lowest anchor index on ties, later gts win clashes),
    provided that IoU is positive. There is no ignore band.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("match threshold must lie in (0, 1)")
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    assigned = np.full(len(anchors), -1, dtype=np.int64)
    if len(gts) == 0 or len(anchors) == 0:
        return assigned
    ious = iou_matrix(anchors, gts)
    best_gt = ious.argmax(axis=1)
    best_iou = ious[np.arange(len(anchors)), best_gt]
    pos = best_iou >= threshold
    assigned[pos] = best_gt[pos]
    if low_quality:
        best_anchor = ious.argmax(axis=0)
        for g, a in enumerate(best_anchor):
            if ious[a, g] > 0:
                assigned[a] = g
    return assigned


def regression_targets(anchors, gts, assigned):
    """(N, 4) deltas for positives (zeros elsewhere) and the positive mask."""
    anchors = np.asarray(anchors, dtype=np.float64)
    pos = assigned >= 0
    targets = np.zeros((len(anchors), 4))
    if pos.any():
        targets[pos] = encode(np.asarray(gts, dtype=np.float64)[assigned[pos]], anchors[pos])
    return targets, pos
