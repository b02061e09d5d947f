"""Tensor and tape: the reverse-mode bookkeeping.

Operations record themselves on the innermost active :class:`Tape` whenever
one of their inputs requires a gradient. Outside a tape nothing is recorded,
which is how inference runs.
"""
from __future__ import annotations

import threading
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

_local = threading.local()


class NonFiniteError(FloatingPointError):
    """A NaN or Inf showed up in a loss or gradient."""


class Tensor:
    """A dense array with an optional gradient requirement.

    The data is kept as-is (no copy); float32 is the training default and
    float64 is used by gradient checks.
    """

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad}{tag})"

    # Convenience operators map onto the restricted op set.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __mul__(self, other):
        from . import ops

        if isinstance(other, Tensor):
            return ops.mul_scalar(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __getitem__(self, index):
        from . import ops

        return ops.index(self, index)


def parameter(data, name=None):
    return Tensor(data, requires_grad=True, name=name)


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of executed operations, consumed by one reverse pass.

    Use as a context manager; tapes nest, the innermost one records.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.consumed = False

    def __enter__(self):
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _local.stack.pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def gradient(self, loss: Tensor, wrt: Sequence[Tensor], check_finite: bool = True) -> list[np.ndarray]:
        """Gradients of scalar ``loss`` with respect to each tensor in ``wrt``.

        Tensors the loss does not depend on get an exact zero array.
        """
        if self.consumed:
            raise RuntimeError("tape already consumed by a backward pass")
        if loss.data.size != 1:
            raise ValueError(f"loss must be a scalar, got shape {loss.shape}")
        if not self.nodes:
            raise RuntimeError("tape is empty; nothing was recorded")
        if check_finite and not np.isfinite(loss.data).all():
            raise NonFiniteError(f"loss is not finite: {loss.data}")
        self.consumed = True
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        wanted = {id(t) for t in wrt}
        for node in reversed(self.nodes):
            g = grads.get(id(node.out))
            if g is None:
                continue
            if id(node.out) not in wanted:
                del grads[id(node.out)]
            in_grads = node.backward(g)
            for t, gi in zip(node.inputs, in_grads):
                if gi is None or not t.requires_grad:
                    continue
                key = id(t)
                prev = grads.get(key)
                if prev is None:
                    grads[key] = gi if gi.dtype == t.data.dtype else gi.astype(t.data.dtype)
                else:
                    grads[key] = prev + gi
        out = []
        for t in wrt:
            g = grads.get(id(t))
            if g is None:
                g = np.zeros_like(t.data)
            elif g.shape != t.shape:
                g = g.reshape(t.shape)
            if check_finite and not np.isfinite(g).all():
                raise NonFiniteError(f"non-finite gradient for {t!r}")
            out.append(g)
        self.nodes = []
        return out


def active_tape() -> Optional[Tape]:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def record(out_data: np.ndarray, inputs: Iterable[Tensor], backward: Callable) -> Tensor:
    """Wrap ``out_data`` and, when inside a tape, register its backward rule."""
    inputs = tuple(inputs)
    needs = any(t.requires_grad for t in inputs)
    tape = active_tape() if needs else None
    out = Tensor(out_data, requires_grad=tape is not None)
    if tape is not None:
        tape.nodes.append(_Node(out, inputs, backward))
    return out


def recording(*inputs: Tensor) -> bool:
    """True when an op on ``inputs`` will be recorded (so it must keep saved state)."""
    return any(t.requires_grad for t in inputs) and active_tape() is not None
