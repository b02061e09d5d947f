"""Score filtering, decoding and greedy NMS."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from .boxes import decode


@dataclass(frozen=True)
class Detection:
    box: tuple
    score: float


def nms(boxes, scores, threshold: float) -> np.ndarray:
    """Indices kept by greedy NMS, in descending score order (stable on ties)."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    keep = kernels.nms_sorted(np.ascontiguousarray(np.asarray(boxes, dtype=np.float64)[order]), threshold)
    return order[np.asarray(keep, dtype=np.int64)]


def decode_and_nms(scores, deltas, anchors, config) -> tuple[np.ndarray, np.ndarray]:
    """Boxes (K, 4) and scores (K,) for one image, sorted by descending score.

    Keeps scores above the floor, the top ``pre_nms_top_k`` of those, runs NMS
    and truncates to ``max_detections``.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    cand = np.flatnonzero(scores > config.score_threshold)
    cand = cand[np.argsort(-scores[cand], kind="stable")][: config.pre_nms_top_k]
    if cand.size == 0:
        return np.zeros((0, 4)), np.zeros(0)
    boxes = decode(np.asarray(deltas, dtype=np.float64)[cand], np.asarray(anchors, dtype=np.float64)[cand])
    s = scores[cand]
    keep = nms(boxes, s, config.nms_threshold)[: config.max_detections]
    return boxes[keep], s[keep]


def to_detections(boxes, scores) -> list[Detection]:
    return [Detection(tuple(float(v) for v in b), float(s)) for b, s in zip(boxes, scores)]
