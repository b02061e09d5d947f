"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise (or
when ``FACENAS_KERNELS=python``) the numpy twins in ``_pykernels`` are used.
Both expose ``im2col``, ``col2im``, ``maxpool2_forward``, ``maxpool2_backward``,
``iou_matrix`` and ``nms_sorted``.
"""
import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

_forced = os.environ.get("FACENAS_KERNELS", "").lower()
if _forced == "python" or compiled_backend is None:
    _active = python_backend
    BACKEND = "python"
else:
    _active = compiled_backend
    BACKEND = "cython"


def use_backend(name):
    """Switch the active backend at runtime ("cython" or "python")."""
    global _active, BACKEND
    if name == "python":
        _active = python_backend
    elif name == "cython":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not available; build the extension first")
        _active = compiled_backend
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    BACKEND = name


def im2col(*args):
    return _active.im2col(*args)


def col2im(*args):
    return _active.col2im(*args)


def maxpool2_forward(x):
    return _active.maxpool2_forward(x)


def maxpool2_backward(grad, idx, h, w):
    return _active.maxpool2_backward(grad, idx, h, w)


def iou_matrix(a, b):
    return _active.iou_matrix(a, b)


def nms_sorted(boxes, threshold):
    return _active.nms_sorted(boxes, threshold)
