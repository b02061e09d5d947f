"""Discrete AutoFAE architectures and their JSON document format.

Document schema (``format`` = "facenas.arch", ``version`` = 1)::

    {
      "format": "facenas.arch",
      "version": 1,
      "levels": [2, 3, 4, 5],
      "fe_position": "middle",            # before | middle | after | none
      "num_nodes": 4,
      "opset": "full",
      "stack": ["FAE"],                   # per block: FAE | FA | FE
      "fa": {"td": {"5": {"retained": [], "beta": [1.0, 1.0]}, ...},
             "bu": {...}} | null,
      "fe": {"2": {"edges": [[0, 1, "3x3"], [1, 2, "1x5"], ...]}, ...} | null,
      "meta": {...}
    }

Floats are written with Python's shortest round-trip repr, so save -> load is
bit-exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .fe import FeDag

FORMAT = "facenas.arch"
VERSION = 1
POSITIONS = ("before", "middle", "after")
BLOCK_KINDS = ("FAE", "FA", "FE")


@dataclass
class FaLevel:
    retained: list
    beta: list


@dataclass
class DiscreteArch:
    levels: list
    fa: Optional[dict] = None  # {"td"|"bu": {level: FaLevel}}
    fe: Optional[dict] = None  # {level: FeDag}
    fe_position: str = "middle"
    num_nodes: int = 4
    opset: str = "full"
    stack: list = field(default_factory=lambda: ["FAE"])
    meta: dict = field(default_factory=dict)
    fa_kernel: int = 3  # side of the f_pre / f_post convolutions

    def validate(self):
        if self.fa_kernel < 1 or self.fa_kernel % 2 == 0:
            raise ValueError(f"fa_kernel must be a positive odd integer, not {self.fa_kernel}")
        if self.fa is not None:
            for direction in ("td", "bu"):
                cells = self.fa[direction]
                order = sorted(self.levels, reverse=(direction == "td"))
                for k, lvl in enumerate(order):
                    keep = cells[lvl].retained
                    if k > 0 and not keep:
                        raise ValueError(f"FA {direction} P{lvl}: retained set is empty")
                    if any(not 0 <= j < k for j in keep):
                        raise ValueError(f"FA {direction} P{lvl}: retained index out of range")
                    if len(cells[lvl].beta) != 2:
                        raise ValueError(f"FA {direction} P{lvl}: beta must have 2 entries")
        if self.fe is not None:
            for lvl, dag in self.fe.items():
                dag.validate()
                if dag.num_nodes != self.num_nodes:
                    raise ValueError(f"FE P{lvl}: {dag.num_nodes} nodes, expected {self.num_nodes}")
        if self.fe_position not in POSITIONS + ("none",):
            raise ValueError(f"bad fe_position {self.fe_position!r}")
        for kind in self.stack:
            if kind not in BLOCK_KINDS:
                raise ValueError(f"bad block kind {kind!r}")
            if "FA" in kind and self.fa is None:
                raise ValueError(f"block {kind} needs FA cells")
            if kind in ("FAE", "FE") and self.fe is None:
                raise ValueError(f"block {kind} needs FE cells")
        return self

    def to_dict(self) -> dict:
        fa = None
        if self.fa is not None:
            fa = {
                d: {str(l): {"retained": [int(j) for j in c.retained], "beta": [float(b) for b in c.beta]}
                    for l, c in sorted(cells.items())}
                for d, cells in self.fa.items()
            }
        fe = None
        if self.fe is not None:
            fe = {str(l): {"edges": [[int(j), int(i), op] for j, i, op in dag.edges()]}
                  for l, dag in sorted(self.fe.items())}
        return {
            "format": FORMAT,
            "version": VERSION,
            "levels": [int(l) for l in self.levels],
            "fe_position": self.fe_position,
            "num_nodes": int(self.num_nodes),
            "opset": self.opset,
            "stack": list(self.stack),
            "fa_kernel": int(self.fa_kernel),
            "fa": fa,
            "fe": fe,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscreteArch":
        if doc.get("format") != FORMAT:
            raise ValueError("not an architecture document")
        if doc.get("version") != VERSION:
            raise ValueError(f"unsupported architecture version {doc.get('version')}")
        fa = None
        if doc.get("fa") is not None:
            fa = {
                d: {int(l): FaLevel(list(c["retained"]), list(c["beta"])) for l, c in cells.items()}
                for d, cells in doc["fa"].items()
            }
        fe = None
        if doc.get("fe") is not None:
            fe = {}
            for l, cell in doc["fe"].items():
                edges = sorted(cell["edges"], key=lambda e: e[1])
                if [e[1] for e in edges] != list(range(1, len(edges) + 1)):
                    raise ValueError(f"FE P{l}: every node needs exactly one incoming edge")
                fe[int(l)] = FeDag([e[0] for e in edges], [e[2] for e in edges])
        arch = cls(
            levels=list(doc["levels"]),
            fa=fa,
            fe=fe,
            fe_position=doc.get("fe_position", "middle"),
            num_nodes=int(doc.get("num_nodes", 4)),
            opset=doc.get("opset", "full"),
            stack=list(doc.get("stack", ["FAE"])),
            meta=dict(doc.get("meta", {})),
            fa_kernel=int(doc.get("fa_kernel", 3)),
        )
        return arch.validate()

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "DiscreteArch":
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> "DiscreteArch":
        with open(path) as fh:
            return cls.loads(fh.read())

    def with_stack(self, stack) -> "DiscreteArch":
        return DiscreteArch(self.levels, self.fa, self.fe, self.fe_position, self.num_nodes,
                            self.opset, list(stack), dict(self.meta), self.fa_kernel).validate()
