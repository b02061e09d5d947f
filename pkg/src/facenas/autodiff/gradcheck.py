"""Central finite-difference gradient checking."""
import numpy as np

from .tensor import Tape


def numeric_gradient(fn, tensor, h=1e-5):
    """Central differences of scalar ``fn()`` with respect to ``tensor.data`` (perturbed in place)."""
    data = tensor.data
    grad = np.zeros_like(data, dtype=np.float64)
    flat = data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = float(fn().data)
        flat[i] = old - h
        fm = float(fn().data)
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-7):
    """Largest elementwise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def check_gradients(fn, tensors, h=1e-5):
    """Return the max relative error between tape gradients and finite differences.

    ``fn`` builds a scalar loss from ``tensors`` (which must be float64 and
    require grad).
    """
    with Tape() as tape:
        loss = fn()
    analytic = tape.gradient(loss, tensors)
    worst = 0.0
    for t, a in zip(tensors, analytic):
        worst = max(worst, relative_error(a, numeric_gradient(fn, t, h)))
    return worst
