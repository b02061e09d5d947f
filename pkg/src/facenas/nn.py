"""Parameter declarations and a few layer helpers.

Networks here are plain objects that *declare* their parameters as
:class:`ParamSpec` records and run ``forward(params, ...)`` against any mapping
from name to :class:`Tensor`. Keeping weights outside the modules is what lets
a supernet hand out sliced views of one shared store.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .autodiff import Tensor, conv2d, relu, slice_leading


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple
    init: str = "kaiming"  # kaiming | linear | dirac | zeros | ones | prior | normal
    arch: bool = False
    gain: float = 1.0  # multiplies the initial value


def conv_specs(name, cin, cout, kh, kw, bias=True, init="kaiming"):
    specs = [ParamSpec(f"{name}.w", (cout, cin, kh, kw), init)]
    if bias:
        specs.append(ParamSpec(f"{name}.b", (cout,), "zeros"))
    return specs


PRIOR_PROB = 0.01


def _init_array(spec: ParamSpec, rng: np.random.Generator, dtype):
    shape = spec.shape
    if spec.init in ("kaiming", "linear"):
        # fan-in scaling; gain 2 ahead of a ReLU, 1 for convs without activation
        fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else shape[0]
        std = math.sqrt((2.0 if spec.init == "kaiming" else 1.0) / fan_in)
        return (rng.standard_normal(shape) * std).astype(dtype)
    if spec.init == "dirac":
        # identity mapping for a same-padded (c, c, k, k) conv
        out, cin, kh, kw = shape
        w = np.zeros(shape, dtype=dtype)
        idx = np.arange(min(out, cin))
        w[idx, idx, (kh - 1) // 2, (kw - 1) // 2] = 1.0
        return w
    if spec.init == "normal":
        return (rng.standard_normal(shape) * 0.01).astype(dtype)
    if spec.init == "zeros":
        return np.zeros(shape, dtype=dtype)
    if spec.init == "ones":
        return np.ones(shape, dtype=dtype)
    if spec.init == "prior":
        return np.full(shape, -math.log((1 - PRIOR_PROB) / PRIOR_PROB), dtype=dtype)
    raise ValueError(f"unknown init {spec.init!r}")


def init_params(specs: Iterable[ParamSpec], rng: np.random.Generator, dtype=np.float32) -> dict:
    """Fresh tensors for every spec, drawn in declaration order."""
    out = {}
    for spec in specs:
        if spec.name in out:
            raise ValueError(f"duplicate parameter name {spec.name}")
        value = _init_array(spec, rng, dtype)
        if spec.gain != 1.0:
            value *= dtype(spec.gain)
        out[spec.name] = Tensor(value, requires_grad=True, name=spec.name)
    return out


def split_params(params: Mapping[str, Tensor], specs: Iterable[ParamSpec]):
    """Split into (weight tensors, architecture tensors) following the specs' ``arch`` flags."""
    arch_names = {s.name for s in specs if s.arch}
    weights = [t for n, t in params.items() if n not in arch_names]
    arch = [t for n, t in params.items() if n in arch_names]
    return weights, arch


def count_parameters(specs: Iterable[ParamSpec], include_arch=False) -> int:
    return sum(int(np.prod(s.shape)) for s in specs if include_arch or not s.arch)


class SlicedParams(Mapping):
    """Leading-block views of a larger store, shaped by ``shapes``.

    ``params[name]`` returns ``store[name][:s0, :s1, ...]`` through
    :func:`slice_leading`, so gradients land in the shared store.
    """

    def __init__(self, store: Mapping[str, Tensor], shapes: Mapping[str, tuple]):
        self.store = store
        self.shapes = dict(shapes)
        missing = [n for n in self.shapes if n not in store]
        if missing:
            raise KeyError(f"supernet store lacks parameters: {missing[:5]}")

    def __getitem__(self, name):
        return slice_leading(self.store[name], self.shapes[name])

    def __contains__(self, name):
        return name in self.shapes

    def __iter__(self):
        return iter(self.shapes)

    def __len__(self):
        return len(self.shapes)


def conv(p: Mapping[str, Tensor], name: str, x: Tensor, stride=1, dilation=1, act=False) -> Tensor:
    b: Optional[Tensor] = p[f"{name}.b"] if f"{name}.b" in p else None
    y = conv2d(x, p[f"{name}.w"], b, stride=stride, dilation=dilation)
    return relu(y) if act else y
