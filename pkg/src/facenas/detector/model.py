"""Residual backbone stubs, lateral projections, the shared head and the assembled detector."""
from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from ..autodiff import Tensor, add, concat, head_flatten, relu
from ..cells import FeatureMap, IdentityNeck
from ..nn import ParamSpec, conv, conv_specs, init_params
from .anchors import feature_shapes_for, generate_anchors
from .config import DetectorConfig

BACKBONE_BLOCKS = {"B0": 2, "B1": 3, "B2": 4}
STEM_CHANNELS = 16
STAGE_CHANNELS = (16, 24, 32, 48, 64, 64)


def images_to_input(images: np.ndarray, dtype=np.float32) -> Tensor:
    """uint8 (B, H, W, 3) -> centred (B, 3, H, W) tensor."""
    x = np.asarray(images).transpose(0, 3, 1, 2).astype(dtype) / 255.0 - 0.5
    return Tensor(np.ascontiguousarray(x))


class Backbone:
    """Stride-2 stem down to the first level, then one residual stage per level.

    Each stage after the first opens with a stride-2 3x3 conv; a residual
    block is ``relu(x + conv(relu(conv(x))))``. Parameters live under
    ``bb.{name}``.
    """

    def __init__(self, name: str, levels, channels=None):
        if name not in BACKBONE_BLOCKS:
            raise ValueError(f"unknown backbone {name!r} (expected one of {sorted(BACKBONE_BLOCKS)})")
        self.name = name
        self.levels = list(levels)
        self.blocks = BACKBONE_BLOCKS[name]
        self.channels = list(channels or STAGE_CHANNELS[: len(self.levels)])
        self.prefix = f"bb.{name}"

    def specs(self):
        specs = []
        cin = 3
        for i in range(self.levels[0]):
            specs += conv_specs(f"{self.prefix}.stem{i}", cin, STEM_CHANNELS, 3, 3)
            cin = STEM_CHANNELS
        for k, c in enumerate(self.channels):
            s = f"{self.prefix}.s{k}"
            specs += conv_specs(f"{s}.down" if k else f"{s}.proj", cin, c, 3, 3)
            for r in range(self.blocks):
                specs += conv_specs(f"{s}.r{r}.a", c, c, 3, 3)
                # zero-initialised residual branch keeps deep stubs stable without normalisation
                specs += conv_specs(f"{s}.r{r}.b", c, c, 3, 3, init="zeros")
            cin = c
        return specs

    def forward(self, p, x: Tensor) -> list[Tensor]:
        for i in range(self.levels[0]):
            x = conv(p, f"{self.prefix}.stem{i}", x, stride=2, act=True)
        feats = []
        for k in range(len(self.channels)):
            s = f"{self.prefix}.s{k}"
            x = conv(p, f"{s}.down", x, stride=2, act=True) if k else conv(p, f"{s}.proj", x, act=True)
            for r in range(self.blocks):
                y = conv(p, f"{s}.r{r}.a", x, act=True)
                y = conv(p, f"{s}.r{r}.b", y)
                x = relu(add(x, y))
            feats.append(x)
        return feats


def head_specs(width: int, depth: int):
    specs = []
    for tower, out in (("cls", 1), ("box", 4)):
        for i in range(depth):
            specs += conv_specs(f"head.{tower}{i}", width, width, 3, 3)
        specs.append(ParamSpec(f"head.{tower}_out.w", (out, width, 3, 3), "normal"))
        specs.append(ParamSpec(f"head.{tower}_out.b", (out,), "prior" if tower == "cls" else "zeros"))
    return specs


def head_forward(p, feats: list[Tensor], depth: int):
    """Shared towers over every level; returns flattened (B, N, 1) logits and (B, N, 4) deltas."""
    cls_maps, box_maps = [], []
    for f in feats:
        c, b = f, f
        for i in range(depth):
            c = conv(p, f"head.cls{i}", c, act=True)
            b = conv(p, f"head.box{i}", b, act=True)
        cls_maps.append(head_flatten(conv(p, "head.cls_out", c)))
        box_maps.append(head_flatten(conv(p, "head.box_out", b)))
    return concat(cls_maps, axis=1), concat(box_maps, axis=1)


class Detector:
    """Backbone -> lateral 1x1 projections -> neck -> shared head.

    ``neck`` is any object with ``specs()`` and ``forward(p, pyramid, ctx)``
    (a search neck, a discrete neck or :class:`IdentityNeck`).
    """

    def __init__(self, config: Optional[DetectorConfig] = None, backbone: str = "B0", neck=None,
                 width: int = 32, head_depth: int = 2):
        self.config = config or DetectorConfig()
        self.backbone = Backbone(backbone, self.config.levels)
        self.neck = neck if neck is not None else IdentityNeck()
        self.width = width
        self.head_depth = head_depth
        self._anchor_cache = {}

    def lateral_specs(self):
        return [s for lvl, c in zip(self.config.levels, self.backbone.channels)
                for s in conv_specs(f"lat.P{lvl}", c, self.width, 1, 1, init="linear")]

    def specs(self):
        return self.backbone.specs() + self.lateral_specs() + self.neck.specs() + head_specs(self.width, self.head_depth)

    def init_params(self, rng: np.random.Generator, dtype=np.float32) -> dict:
        params = init_params(self.specs(), rng, dtype)
        overrides = getattr(self.neck, "initial_values", None)
        if overrides is not None:
            for name, value in overrides().items():
                params[name].data[...] = value
        return params

    def pyramid(self, p, x: Tensor) -> list[FeatureMap]:
        feats = self.backbone.forward(p, x)
        return [FeatureMap(conv(p, f"lat.P{lvl}", f), lvl) for lvl, f in zip(self.config.levels, feats)]

    def forward(self, p: Mapping[str, Tensor], x: Tensor, ctx=None):
        """(B, N, 1) class logits and (B, N, 4) box deltas over all anchors."""
        h, w = x.shape[2:]
        feature_shapes_for(self.config, h, w)
        pyramid = self.neck.forward(p, self.pyramid(p, x), ctx)
        return head_forward(p, [fm.tensor for fm in pyramid], self.head_depth)

    def level_shapes(self, p, x: Tensor, ctx=None):
        """Spatial shape of each neck output level."""
        pyramid = self.neck.forward(p, self.pyramid(p, x), ctx)
        return [fm.tensor.shape[2:] for fm in pyramid]

    def anchors(self, height: int, width: int) -> np.ndarray:
        key = (height, width)
        if key not in self._anchor_cache:
            self._anchor_cache[key] = generate_anchors(self.config, feature_shapes_for(self.config, height, width))
        return self._anchor_cache[key]
