"""Average precision with greedy score-ordered matching.

Each detection, highest score first, takes the unmatched ground truth it
overlaps most (IoU >= threshold). Detections that only hit ground truths
marked *ignored* are dropped from the ranking; everything else unmatched is a
false positive. AP is the all-point interpolated area under the pooled
precision/recall curve.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..detector.boxes import iou_matrix

IOU_THRESHOLDS = tuple(np.round(np.arange(0.5, 0.96, 0.05), 2))
SUBSETS = ("easy", "medium", "hard")


def match_image(det_boxes, det_scores, gt_boxes, threshold, ignored=None):
    """Per-detection flags (1 = TP, 0 = FP, -1 = dropped) in descending-score order, plus the scores."""
    det_boxes = np.asarray(det_boxes, dtype=np.float64).reshape(-1, 4)
    det_scores = np.asarray(det_scores, dtype=np.float64).ravel()
    gt_boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    ignored = np.zeros(len(gt_boxes), bool) if ignored is None else np.asarray(ignored, bool)
    order = np.argsort(-det_scores, kind="stable")
    flags = np.zeros(len(order), dtype=np.int64)
    if len(gt_boxes) == 0 or len(order) == 0:
        return flags, det_scores[order]
    ious = iou_matrix(det_boxes[order], gt_boxes)
    hit = ious >= threshold
    counted = hit & ~ignored
    flags[hit[:, ignored].any(axis=1)] = -1
    taken = np.zeros(len(gt_boxes), bool)
    # only rows overlapping a counted gt can become true positives
    for r in np.flatnonzero(counted.any(axis=1)):
        cand = np.where(counted[r] & ~taken, ious[r], -1.0)
        g = int(np.argmax(cand))
        if cand[g] >= 0:
            taken[g] = True
            flags[r] = 1
    return flags, det_scores[order]


def average_precision(flags, scores, num_gt) -> float:
    """All-point interpolated AP from pooled TP/FP flags."""
    if num_gt == 0:
        return 0.0
    flags = np.asarray(flags)
    scores = np.asarray(scores, dtype=np.float64)
    keep = flags >= 0
    flags, scores = flags[keep], scores[keep]
    if flags.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    tp = np.cumsum(flags[order] == 1)
    fp = np.cumsum(flags[order] == 0)
    recall = tp / num_gt
    precision = tp / np.maximum(tp + fp, 1)
    # precision envelope, then sum over recall steps
    mrec = np.concatenate([[0.0], recall])
    mpre = np.concatenate([[0.0], precision])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    return float(np.sum((mrec[1:] - mrec[:-1]) * mpre[1:]))


def evaluate_ap(detections, ground_truths, threshold, ignored=None) -> float:
    """AP over a dataset. ``detections`` is a list of (boxes, scores) per image."""
    all_flags, all_scores, num_gt = [], [], 0
    for k, ((boxes, scores), gts) in enumerate(zip(detections, ground_truths)):
        ign = None if ignored is None else ignored[k]
        f, s = match_image(boxes, scores, gts, threshold, ign)
        all_flags.append(f)
        all_scores.append(s)
        num_gt += len(gts) - (0 if ign is None else int(np.sum(ign)))
    if not all_flags:
        return 0.0
    return average_precision(np.concatenate(all_flags), np.concatenate(all_scores), num_gt)


@dataclass
class EvalReport:
    ap50: float
    ap: float
    subsets: dict = field(default_factory=dict)  # name -> {"ap50": x, "ap": y}

    def to_dict(self):
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text) -> "EvalReport":
        d = json.loads(text)
        return cls(d["ap50"], d["ap"], d.get("subsets", {}))


def subset_ignore_masks(ground_truths, image_height, floors):
    """Nested subsets: a face below the subset's relative-scale floor is ignored."""
    out = {}
    for name, floor in floors.items():
        out[name] = [((np.asarray(g).reshape(-1, 4)[:, 3] - np.asarray(g).reshape(-1, 4)[:, 1]) / image_height) < floor
                     for g in ground_truths]
    return out


def compute_ap(detections, ground_truths, iou_thresholds=IOU_THRESHOLDS, image_height=None,
               subset_floors=None) -> EvalReport:
    """AP.50 and mean AP over ``iou_thresholds`` (overall and per scale subset).

    ``subset_floors`` maps subset name to the minimum relative scale counted
    (e.g. {"easy": 0.23, "medium": 0.11, "hard": 0.0}); requires ``image_height``.
    """
    thresholds = [float(t) for t in iou_thresholds]

    def both(ignored):
        per = [evaluate_ap(detections, ground_truths, t, ignored) for t in thresholds]
        ap50 = per[thresholds.index(0.5)] if 0.5 in thresholds else evaluate_ap(detections, ground_truths, 0.5, ignored)
        return ap50, float(np.mean(per))

    ap50, ap = both(None)
    subsets = {}
    if subset_floors:
        if image_height is None:
            raise ValueError("subset evaluation needs the image height")
        for name, mask in subset_ignore_masks(ground_truths, image_height, subset_floors).items():
            s50, s = both(mask)
            subsets[name] = {"ap50": s50, "ap": s}
    return EvalReport(ap50, ap, subsets)
