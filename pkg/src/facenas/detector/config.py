"""Detector hyper-parameters and their key-value file form."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..config import from_section, read_config, to_section, write_config

SECTION = "detector"


@dataclass(frozen=True)
class DetectorConfig:
    """Anchor layout and post-processing.

    ``anchor_scales[i]`` is the anchor side at ``levels[i]`` in units of that
    level's stride, so the default toy layout (scale 1 at strides 4..32) tiles
    anchors of 4, 8, 16 and 32 px.
    """

    levels: tuple = (2, 3, 4, 5)
    anchor_scales: tuple = (1.0, 1.0, 1.0, 1.0)
    anchor_ratio: float = 1.5  # height / width
    match_threshold: float = 0.4
    nms_threshold: float = 0.4
    score_threshold: float = 0.05
    pre_nms_top_k: int = 2000
    max_detections: int = 750

    def __post_init__(self):
        if len(self.levels) != len(self.anchor_scales):
            raise ValueError("need exactly one anchor scale per pyramid level")
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("levels must be strictly increasing")
        for name in ("match_threshold", "nms_threshold", "score_threshold"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.pre_nms_top_k < self.max_detections:
            raise ValueError("pre_nms_top_k must be >= max_detections")
        if self.anchor_ratio <= 0 or any(s <= 0 for s in self.anchor_scales):
            raise ValueError("anchor scales and ratio must be positive")

    @property
    def strides(self):
        return tuple(2 ** l for l in self.levels)

    @property
    def max_stride(self):
        return 2 ** max(self.levels)

    @classmethod
    def wide_preset(cls) -> "DetectorConfig":
        """Six levels P2..P7 with 4..128 px anchors, for large inputs."""
        return cls(levels=(2, 3, 4, 5, 6, 7), anchor_scales=(1.0,) * 6)

    def replace(self, **kw) -> "DetectorConfig":
        return dataclasses.replace(self, **kw)

    def save(self, path):
        write_config(path, {SECTION: to_section(self)})

    @classmethod
    def load(cls, path) -> "DetectorConfig":
        return from_section(cls, read_config(path).get(SECTION, {}))
