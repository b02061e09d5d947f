"""Box geometry: IoU and the anchor-relative delta encoding."""
import math

import numpy as np

from .. import kernels

# delta normalisation (center, size)
VARIANCES = (0.1, 0.1, 0.2, 0.2)
_MAX_LOG = math.log(1000.0 / 16)


def iou(a, b) -> float:
    """IoU of two (x1, y1, x2, y2) boxes; 0 when disjoint."""
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def iou_matrix(a, b) -> np.ndarray:
    return kernels.iou_matrix(a, b)


def valid_boxes(boxes) -> bool:
    b = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    return bool(np.all(b[:, 2] > b[:, 0]) and np.all(b[:, 3] > b[:, 1]))


def encode(gt, anchors) -> np.ndarray:
    """Deltas taking ``anchors`` to ``gt`` (both (N, 4))."""
    gt = np.asarray(gt, dtype=np.float64)
    an = np.asarray(anchors, dtype=np.float64)
    aw, ah = an[:, 2] - an[:, 0], an[:, 3] - an[:, 1]
    ax, ay = an[:, 0] + 0.5 * aw, an[:, 1] + 0.5 * ah
    gw, gh = gt[:, 2] - gt[:, 0], gt[:, 3] - gt[:, 1]
    gx, gy = gt[:, 0] + 0.5 * gw, gt[:, 1] + 0.5 * gh
    return np.stack([
        (gx - ax) / aw / VARIANCES[0],
        (gy - ay) / ah / VARIANCES[1],
        np.log(gw / aw) / VARIANCES[2],
        np.log(gh / ah) / VARIANCES[3],
    ], axis=1)


def decode(deltas, anchors) -> np.ndarray:
    d = np.asarray(deltas, dtype=np.float64)
    an = np.asarray(anchors, dtype=np.float64)
    aw, ah = an[:, 2] - an[:, 0], an[:, 3] - an[:, 1]
    ax, ay = an[:, 0] + 0.5 * aw, an[:, 1] + 0.5 * ah
    cx = ax + d[:, 0] * VARIANCES[0] * aw
    cy = ay + d[:, 1] * VARIANCES[1] * ah
    w = aw * np.exp(np.minimum(d[:, 2] * VARIANCES[2], _MAX_LOG))
    h = ah * np.exp(np.minimum(d[:, 3] * VARIANCES[3], _MAX_LOG))
    return np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=1)
