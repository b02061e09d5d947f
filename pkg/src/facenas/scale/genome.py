"""Five-gene encoding of one supernet path and its compact string form.

String form: ``B1-FAE-FA-H×2-32`` is backbone B1, two stacked neck blocks
(the second skips its FE cells), a head with two convs per tower, and 32
channels. ``x`` is accepted in place of ``×`` when parsing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

BACKBONES = ("B0", "B1", "B2")
STACK_DEPTHS = (1, 2, 3)
HEAD_DEPTHS = (1, 2, 3, 4)
WIDTHS = (16, 24, 32, 48, 64)
MAX_STACK = max(STACK_DEPTHS)

_PATTERN = re.compile(r"^(B\d)((?:-(?:FAE|FA))+)-H[×x](\d+)-(\d+)$")


@dataclass(frozen=True)
class SearchSpace:
    backbones: tuple = BACKBONES
    stack_depths: tuple = STACK_DEPTHS
    head_depths: tuple = HEAD_DEPTHS
    widths: tuple = WIDTHS

    @property
    def max_width(self):
        return max(self.widths)

    @property
    def max_stack(self):
        return max(self.stack_depths)

    @property
    def max_head(self):
        return max(self.head_depths)


@dataclass(frozen=True)
class ArchGenome:
    backbone: str
    stack_depth: int
    skip_fe: tuple  # one flag per stacked block; True drops that block's FE cells
    head_depth: int
    width: int

    def validate(self, space: SearchSpace = SearchSpace()) -> "ArchGenome":
        if self.backbone not in space.backbones:
            raise ValueError(f"backbone {self.backbone!r} not in {space.backbones}")
        if self.stack_depth not in space.stack_depths:
            raise ValueError(f"stack depth {self.stack_depth} not in {space.stack_depths}")
        if len(self.skip_fe) != self.stack_depth:
            raise ValueError("skip-FE mask length must equal the stack depth")
        if self.head_depth not in space.head_depths:
            raise ValueError(f"head depth {self.head_depth} not in {space.head_depths}")
        if self.width not in space.widths:
            raise ValueError(f"width {self.width} not in {space.widths}")
        return self

    @property
    def stack(self) -> list:
        return ["FA" if skip else "FAE" for skip in self.skip_fe]

    def __str__(self):
        return "-".join([self.backbone, *self.stack, f"H×{self.head_depth}", str(self.width)])

    @classmethod
    def parse(cls, text: str) -> "ArchGenome":
        m = _PATTERN.match(text.strip())
        if not m:
            raise ValueError(f"not a genome string: {text!r}")
        blocks = m.group(2).strip("-").split("-")
        return cls(m.group(1), len(blocks), tuple(b == "FA" for b in blocks), int(m.group(3)), int(m.group(4)))

    def to_dict(self):
        return {"backbone": self.backbone, "stack_depth": self.stack_depth, "skip_fe": list(self.skip_fe),
                "head_depth": self.head_depth, "width": self.width, "string": str(self)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["backbone"], int(d["stack_depth"]), tuple(bool(b) for b in d["skip_fe"]),
                   int(d["head_depth"]), int(d["width"]))


def to_genes(g: ArchGenome, space: SearchSpace = SearchSpace()) -> list:
    """[backbone index, stack depth, skip-mask bits, head depth, width index]."""
    bits = sum(1 << k for k, s in enumerate(g.skip_fe) if s)
    return [space.backbones.index(g.backbone), g.stack_depth, bits, g.head_depth, space.widths.index(g.width)]


def from_genes(genes, space: SearchSpace = SearchSpace()) -> ArchGenome:
    """Inverse of :func:`to_genes`; mask bits beyond the stack depth are dropped."""
    b, depth, bits, head, w = (int(v) for v in genes)
    mask = tuple(bool(bits >> k & 1) for k in range(depth))
    return ArchGenome(space.backbones[b], depth, mask, head, space.widths[w]).validate(space)


def gene_choices(space: SearchSpace = SearchSpace(), active_widths=None):
    """Allowed values per gene position."""
    widths = space.widths if active_widths is None else tuple(active_widths)
    return [list(range(len(space.backbones))), list(space.stack_depths), list(range(2 ** space.max_stack)),
            list(space.head_depths), [space.widths.index(w) for w in widths]]


def sample_uniform_path(rng: np.random.Generator, active_widths=None, space: SearchSpace = SearchSpace()) -> ArchGenome:
    """Each field uniform over its set; widths restricted to ``active_widths``."""
    widths = tuple(space.widths if active_widths is None else active_widths)
    if not widths:
        raise ValueError("active width set is empty")
    for w in widths:
        if w not in space.widths:
            raise ValueError(f"width {w} not in the search space")
    backbone = space.backbones[rng.integers(len(space.backbones))]
    depth = int(space.stack_depths[rng.integers(len(space.stack_depths))])
    mask = tuple(bool(v) for v in rng.integers(0, 2, size=depth))
    head = int(space.head_depths[rng.integers(len(space.head_depths))])
    width = int(widths[rng.integers(len(widths))])
    return ArchGenome(backbone, depth, mask, head, width).validate(space)
