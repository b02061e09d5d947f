"""Anchor tiling: one anchor per feature-map cell per level."""
import math

import numpy as np


def anchor_size(scale: float, stride: int, ratio: float = 1.5):
    """(width, height) with area (scale*stride)^2 and height/width = ratio."""
    side = scale * stride
    return side / math.sqrt(ratio), side * math.sqrt(ratio)


def generate_anchors(config, feature_shapes) -> np.ndarray:
    """(N, 4) anchors in level order, row-major within a level.

    ``feature_shapes`` is one (h, w) per configured level; centers sit at
    ``(x + 0.5) * stride``.
    """
    feature_shapes = list(feature_shapes)
    if len(feature_shapes) != len(config.levels):
        raise ValueError(f"{len(feature_shapes)} feature maps for {len(config.levels)} levels")
    out = []
    for (h, w), lvl, scale in zip(feature_shapes, config.levels, config.anchor_scales):
        stride = 2 ** lvl
        aw, ah = anchor_size(scale, stride, config.anchor_ratio)
        ys, xs = np.meshgrid((np.arange(h) + 0.5) * stride, (np.arange(w) + 0.5) * stride, indexing="ij")
        cx, cy = xs.ravel(), ys.ravel()
        out.append(np.stack([cx - aw / 2, cy - ah / 2, cx + aw / 2, cy + ah / 2], axis=1))
    return np.concatenate(out, axis=0) if out else np.zeros((0, 4))


def feature_shapes_for(config, height: int, width: int):
    if height % config.max_stride or width % config.max_stride:
        raise ValueError(f"input {height}x{width} not divisible by the deepest stride {config.max_stride}")
    return [(height // s, width // s) for s in config.strides]


def anchor_levels(config, feature_shapes) -> np.ndarray:
    """Pyramid level of each anchor, aligned with :func:`generate_anchors`."""
    return np.concatenate([np.full(h * w, lvl) for (h, w), lvl in zip(feature_shapes, config.levels)])
