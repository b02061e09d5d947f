"""Minimal reverse-mode differentiation over numpy arrays."""
from .checkpoint import load_checkpoint, save_checkpoint
from .ops import (
    add,
    add_n,
    concat,
    conv2d,
    count_flops,
    head_flatten,
    index,
    maxpool2,
    mul_scalar,
    relu,
    reshape,
    scale,
    sigmoid_focal_loss,
    slice_leading,
    smooth_l1,
    softmax_t,
    straight_through,
    sum_all,
    upsample2x,
    weighted_sum,
)
from .optim import SGD, Adam
from .tensor import NonFiniteError, Tape, Tensor, parameter

__all__ = [
    "Adam", "NonFiniteError", "SGD", "Tape", "Tensor", "add", "add_n", "concat", "conv2d",
    "count_flops", "head_flatten", "index", "load_checkpoint", "maxpool2", "mul_scalar",
    "parameter", "relu", "reshape", "save_checkpoint", "scale", "sigmoid_focal_loss",
    "slice_leading", "smooth_l1", "softmax_t", "straight_through", "sum_all", "upsample2x",
    "weighted_sum",
]
