"""The differentiable op set.

Exactly what the cells and detector need; no general broadcasting. Each op
computes its forward with numpy (hot loops go through :mod:`facenas.kernels`)
and registers a closure producing input gradients.
"""
from __future__ import annotations

import threading
from typing import Optional, Sequence

import numpy as np

from .. import kernels
from .tensor import Tensor, record, recording

_flops = threading.local()


class count_flops:
    """Context manager accumulating closed-form conv FLOPs (2*kh*kw*Cin*Cout*Ho*Wo per image)."""

    def __enter__(self):
        self.total = 0
        stack = getattr(_flops, "stack", None)
        if stack is None:
            stack = _flops.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _flops.stack.pop()
        return False


def conv_flops(kh, kw, cin, cout, out_h, out_w):
    return 2 * kh * kw * cin * cout * out_h * out_w


def same_padding(size, k, stride, dilation):
    """Output size and (before, after) zero padding for "same" convolution.

    Odd totals put the extra pixel after (bottom/right).
    """
    out = -(-size // stride)
    total = max((out - 1) * stride + dilation * (k - 1) + 1 - size, 0)
    return out, total // 2, total - total // 2


def conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None, stride: int = 1, dilation: int = 1) -> Tensor:
    """Same-padded 2-D convolution. ``w`` is (out, in, kh, kw)."""
    xd, wd = x.data, w.data
    if xd.ndim != 4 or wd.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and kernel, got {xd.shape} and {wd.shape}")
    n, c, h, wdt = xd.shape
    o, ci, kh, kw = wd.shape
    if ci != c:
        raise ValueError(f"channel mismatch: input has {c}, kernel expects {ci}")
    if h == 0 or wdt == 0:
        raise ValueError("conv2d on zero-sized spatial dims")
    if stride < 1 or dilation < 1:
        raise ValueError("stride and dilation must be >= 1")
    out_h, pt, _ = same_padding(h, kh, stride, dilation)
    out_w, pl, _ = same_padding(wdt, kw, stride, dilation)
    stack = getattr(_flops, "stack", None)
    if stack:
        stack[-1].total += n * conv_flops(kh, kw, c, o, out_h, out_w)

    pointwise = kh == 1 and kw == 1 and stride == 1
    if pointwise:
        cols = xd.transpose(1, 0, 2, 3).reshape(c, n * h * wdt)
    else:
        cols = kernels.im2col(np.ascontiguousarray(xd), kh, kw, stride, dilation, pt, pl, out_h, out_w)
    w2 = wd.reshape(o, -1)
    out = (w2 @ cols).reshape(o, n, out_h, out_w).transpose(1, 0, 2, 3)
    if b is not None:
        out = out + b.data.reshape(1, o, 1, 1)
    else:
        out = np.ascontiguousarray(out)

    inputs = (x, w) if b is None else (x, w, b)
    if not recording(*inputs):
        return Tensor(out)

    def backward(g):
        g2 = g.transpose(1, 0, 2, 3).reshape(o, -1)
        dw = (g2 @ cols.T).reshape(wd.shape) if w.requires_grad else None
        dx = None
        if x.requires_grad:
            dcols = w2.T @ g2
            if pointwise:
                dx = np.ascontiguousarray(dcols.reshape(c, n, h, wdt).transpose(1, 0, 2, 3))
            else:
                dx = kernels.col2im(dcols, xd.shape, kh, kw, stride, dilation, pt, pl, out_h, out_w)
        if b is None:
            return dx, dw
        return dx, dw, g.sum(axis=(0, 2, 3))

    return record(out, inputs, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add needs equal shapes, got {a.shape} and {b.shape}")
    return record(a.data + b.data, (a, b), lambda g: (g, g))


def add_n(xs: Sequence[Tensor]) -> Tensor:
    xs = list(xs)
    if not xs:
        raise ValueError("add_n of an empty list")
    shape = xs[0].shape
    acc = xs[0].data.copy()
    for t in xs[1:]:
        if t.shape != shape:
            raise ValueError(f"add_n shape mismatch: {t.shape} vs {shape}")
        acc += t.data
    return record(acc, xs, lambda g: [g] * len(xs))


def add_const(x: Tensor, c: np.ndarray) -> Tensor:
    """x + c for a constant array of the same shape."""
    c = np.asarray(c, dtype=x.dtype)
    if c.shape != x.shape:
        raise ValueError("add_const shape mismatch")
    return record(x.data + c, (x,), lambda g: (g,))


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a Python constant."""
    return record(x.data * c, (x,), lambda g: (g * c,))


def mul_scalar(x: Tensor, s: Tensor) -> Tensor:
    """Multiply a tensor by a single-element tensor ``s`` (e.g. one entry of alpha)."""
    if s.size != 1:
        raise ValueError(f"mul_scalar expects a one-element factor, got shape {s.shape}")
    sv = s.data.reshape(())
    out = x.data * sv

    def backward(g):
        dx = g * sv if x.requires_grad else None
        ds = np.asarray(np.vdot(g, x.data), dtype=s.data.dtype).reshape(s.shape) if s.requires_grad else None
        return dx, ds

    return record(out, (x, s), backward)


def index(v: Tensor, idx) -> Tensor:
    """Basic indexing (used to pick entries of small parameter vectors)."""
    out = np.array(v.data[idx])

    def backward(g):
        dv = np.zeros_like(v.data)
        dv[idx] += g
        return (dv,)

    return record(out, (v,), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return record(x.data * mask, (x,), lambda g: (g * mask,))


def _up1d_forward(x, axis):
    n = x.shape[axis]
    idx = np.arange(n)
    prev = np.take(x, np.maximum(idx - 1, 0), axis=axis)
    nxt = np.take(x, np.minimum(idx + 1, n - 1), axis=axis)
    even = 0.75 * x + 0.25 * prev
    odd = 0.75 * x + 0.25 * nxt
    out = np.stack([even, odd], axis=axis + 1)
    shape = list(x.shape)
    shape[axis] = 2 * n
    return out.reshape(shape)


def _up1d_backward(g, axis):
    n2 = g.shape[axis]
    n = n2 // 2
    ge = np.take(g, np.arange(0, n2, 2), axis=axis)
    go = np.take(g, np.arange(1, n2, 2), axis=axis)
    dx = 0.75 * (ge + go)
    # even output i reads x[max(i-1, 0)]; odd output i reads x[min(i+1, n-1)]
    sl = [slice(None)] * g.ndim

    def at(s):
        sl2 = list(sl)
        sl2[axis] = s
        return tuple(sl2)

    dx[at(slice(0, n - 1))] += 0.25 * ge[at(slice(1, n))]
    dx[at(slice(0, 1))] += 0.25 * ge[at(slice(0, 1))]
    dx[at(slice(1, n))] += 0.25 * go[at(slice(0, n - 1))]
    dx[at(slice(n - 1, n))] += 0.25 * go[at(slice(n - 1, n))]
    return dx


def upsample2x(x: Tensor) -> Tensor:
    """Bilinear 2x upsampling, align-corners-false, edge-clamped.

    Output sample ``o`` reads source coordinate ``(o + 0.5) / 2 - 0.5``, so each
    output is 0.75/0.25 of its two nearest inputs along each axis.
    """
    d = x.data
    if d.ndim != 4 or d.shape[2] < 1 or d.shape[3] < 1:
        raise ValueError(f"upsample2x expects (B, C, H, W) with H, W >= 1, got {d.shape}")
    out = _up1d_forward(_up1d_forward(d, 2), 3)

    def backward(g):
        return (_up1d_backward(_up1d_backward(g, 3), 2),)

    return record(out, (x,), backward)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 stride-2 max pool; gradient goes to the first maximal element."""
    d = x.data
    if d.ndim != 4 or d.shape[2] < 2 or d.shape[3] < 2:
        raise ValueError(f"maxpool2 needs spatial dims >= 2, got {d.shape}")
    out, idx = kernels.maxpool2_forward(np.ascontiguousarray(d))
    h, w = d.shape[2], d.shape[3]
    return record(out, (x,), lambda g: (kernels.maxpool2_backward(np.ascontiguousarray(g), idx, h, w),))


def softmax_np(logits, temperature=1.0):
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_t(logits: Tensor, temperature: float = 1.0) -> Tensor:
    """Temperature softmax over a 1-D logit vector."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if logits.data.ndim != 1:
        raise ValueError("softmax_t expects a 1-D vector")
    if not np.isfinite(logits.data).all():
        raise ValueError("softmax_t got non-finite logits")
    z = logits.data / temperature
    z = z - z.max()
    e = np.exp(z)
    p = e / e.sum()

    def backward(g):
        return ((p * (g - np.dot(g, p))) / temperature,)

    return record(p, (logits,), backward)


def straight_through(hard: np.ndarray, soft: Tensor) -> Tensor:
    """Forward value is exactly ``hard``; the gradient passes to ``soft`` unchanged."""
    hard = np.asarray(hard, dtype=soft.data.dtype)
    if hard.shape != soft.shape:
        raise ValueError("straight_through shape mismatch")
    return record(hard.copy(), (soft,), lambda g: (g,))


def slice_leading(w: Tensor, shape: Sequence[int]) -> Tensor:
    """Leading sub-block ``w[:s0, :s1, ...]`` as a view sharing storage with ``w``."""
    shape = tuple(shape)
    if len(shape) != w.data.ndim or any(s > d for s, d in zip(shape, w.shape)):
        raise ValueError(f"cannot slice {w.shape} to {shape}")
    sl = tuple(slice(0, s) for s in shape)
    view = w.data[sl]
    if shape == w.shape:
        view = w.data

    def backward(g):
        if shape == w.shape:
            return (g,)
        full = np.zeros_like(w.data)
        full[sl] = g
        return (full,)

    out = record(view, (w,), backward)
    return out


def head_flatten(x: Tensor) -> Tensor:
    """(B, C, H, W) -> (B, H*W, C): per-location rows in row-major spatial order."""
    n, c, h, w = x.shape
    out = x.data.transpose(0, 2, 3, 1).reshape(n, h * w, c)

    def backward(g):
        return (g.reshape(n, h, w, c).transpose(0, 3, 1, 2),)

    return record(out, (x,), backward)


def concat(xs: Sequence[Tensor], axis: int) -> Tensor:
    xs = list(xs)
    out = np.concatenate([t.data for t in xs], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in xs])[:-1]

    def backward(g):
        return np.split(g, bounds, axis=axis)

    return record(out, xs, backward)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return record(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def sum_all(x: Tensor) -> Tensor:
    return record(np.asarray(x.data.sum(), dtype=x.dtype), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def weighted_sum(x: Tensor, weights: np.ndarray) -> Tensor:
    """sum(x * weights) for a constant array ``weights``; handy for gradient checks."""
    weights = np.asarray(weights, dtype=x.dtype)
    if weights.shape != x.shape:
        raise ValueError("weighted_sum shape mismatch")
    return record(np.asarray(np.vdot(x.data, weights), dtype=x.dtype), (x,), lambda g: (g * weights,))


def sigmoid_np(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid_focal_loss(logits: Tensor, targets: np.ndarray, valid: Optional[np.ndarray] = None,
                       alpha: float = 0.25, gamma: float = 2.0) -> Tensor:
    """Summed binary focal loss.

    ``targets`` is 0/1 per logit; entries with ``valid == False`` are ignored.
    """
    z = logits.data
    if not np.isfinite(z).all():
        raise ValueError("focal loss got non-finite logits")
    t = np.asarray(targets, dtype=z.dtype)
    m = np.ones_like(z) if valid is None else np.asarray(valid, dtype=z.dtype)
    p = sigmoid_np(z)
    # log p and log(1-p) via softplus for stability
    log_p = -np.logaddexp(0, -z)
    log_1mp = -np.logaddexp(0, z)
    a_t = np.where(t > 0, alpha, 1 - alpha)
    p_t = np.where(t > 0, p, 1 - p)
    log_pt = np.where(t > 0, log_p, log_1mp)
    mod = (1 - p_t) ** gamma
    loss = -(a_t * mod * log_pt) * m

    def backward(g):
        # d/dz of -a (1-pt)^gamma log pt, with dpt/dz = s * pt (1-pt), s = +1 for t=1 else -1
        s = np.where(t > 0, 1.0, -1.0)
        one_m = 1 - p_t
        dpt = s * p_t * one_m
        d = -a_t * (-gamma * one_m ** (gamma - 1) * dpt * log_pt + mod * s * one_m) if gamma != 0 else -a_t * s * one_m
        return (g * d * m,)

    return record(np.asarray(loss.sum(), dtype=z.dtype), (logits,), backward)


def smooth_l1(pred: Tensor, target: np.ndarray, mask: np.ndarray, beta: float = 1.0 / 9) -> Tensor:
    """Summed smooth-L1 over rows selected by boolean ``mask``; ``pred`` is (..., 4)."""
    d = pred.data - np.asarray(target, dtype=pred.dtype)
    m = np.asarray(mask, dtype=pred.dtype)[..., None]
    ad = np.abs(d)
    quad = ad < beta
    loss = np.where(quad, 0.5 * d * d / beta, ad - 0.5 * beta) * m

    def backward(g):
        return (g * np.where(quad, d / beta, np.sign(d)) * m,)

    return record(np.asarray(loss.sum(), dtype=pred.dtype), (pred,), backward)


def isfinite(x: Tensor) -> bool:
    return bool(np.isfinite(x.data).all())

