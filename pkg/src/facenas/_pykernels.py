"""Pure-numpy reference implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature and
bit-compatible results; ``facenas.kernels`` picks one at import time.
"""
import numpy as np


def im2col(x, kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w):
    """Unfold ``x`` (B, C, H, W) into a (C*kh*kw, B*out_h*out_w) patch matrix.

    Out-of-image taps read zero. Row order is (channel, ky, kx); column order is
    (batch, oy, ox), both row-major.
    """
    b, c, h, w = x.shape
    pad_bottom = max((out_h - 1) * stride + dilation * (kh - 1) + 1 - h - pad_top, 0)
    pad_right = max((out_w - 1) * stride + dilation * (kw - 1) + 1 - w - pad_left, 0)
    if pad_top or pad_left or pad_bottom or pad_right:
        xp = np.pad(x, ((0, 0), (0, 0), (pad_top, pad_bottom), (pad_left, pad_right)))
    else:
        xp = x
    cols = np.empty((c, kh, kw, b, out_h, out_w), dtype=x.dtype)
    span_h = stride * (out_h - 1) + 1
    span_w = stride * (out_w - 1) + 1
    for i in range(kh):
        y0 = i * dilation
        for j in range(kw):
            x0 = j * dilation
            patch = xp[:, :, y0:y0 + span_h:stride, x0:x0 + span_w:stride]
            cols[:, i, j] = patch.transpose(1, 0, 2, 3)
    return cols.reshape(c * kh * kw, b * out_h * out_w)


def col2im(cols, x_shape, kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w):
    """Adjoint of :func:`im2col`: scatter-add patch rows back onto the image."""
    b, c, h, w = x_shape
    pad_bottom = max((out_h - 1) * stride + dilation * (kh - 1) + 1 - h - pad_top, 0)
    pad_right = max((out_w - 1) * stride + dilation * (kw - 1) + 1 - w - pad_left, 0)
    xp = np.zeros((b, c, h + pad_top + pad_bottom, w + pad_left + pad_right), dtype=cols.dtype)
    cols6 = cols.reshape(c, kh, kw, b, out_h, out_w)
    span_h = stride * (out_h - 1) + 1
    span_w = stride * (out_w - 1) + 1
    for i in range(kh):
        y0 = i * dilation
        for j in range(kw):
            x0 = j * dilation
            xp[:, :, y0:y0 + span_h:stride, x0:x0 + span_w:stride] += cols6[:, i, j].transpose(1, 0, 2, 3)
    return np.ascontiguousarray(xp[:, :, pad_top:pad_top + h, pad_left:pad_left + w])


def maxpool2_forward(x):
    """2x2 / stride-2 max pool. Returns (output, argmax code in 0..3).

    The code is the row-major position inside the window; ties resolve to the
    first maximal element.
    """
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    win = x[:, :, :2 * h2, :2 * w2].reshape(b, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(b, c, h2, w2, 4)
    idx = np.argmax(win, axis=-1).astype(np.int8)
    out = np.take_along_axis(win, idx[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx


def maxpool2_backward(grad, idx, h, w):
    b, c, h2, w2 = grad.shape
    win = np.zeros((b, c, h2, w2, 4), dtype=grad.dtype)
    np.put_along_axis(win, idx[..., None].astype(np.intp), grad[..., None], axis=-1)
    dx = np.zeros((b, c, h, w), dtype=grad.dtype)
    dx[:, :, :2 * h2, :2 * w2] = win.reshape(b, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        b, c, 2 * h2, 2 * w2
    )
    return dx


def iou_matrix(a, b):
    """Pairwise IoU between (N, 4) and (M, 4) boxes in x1, y1, x2, y2 order."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / union, 0.0)
    return out


def nms_sorted(boxes, threshold):
    """Greedy NMS over boxes already sorted by descending score.

    A box is suppressed when its IoU with an earlier kept box is >= threshold.
    Returns kept row indices (int64) in input order.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    n = boxes.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    x1, y1, x2, y2 = boxes.T
    areas = (x2 - x1) * (y2 - y1)
    suppressed = np.zeros(n, dtype=bool)
    keep = []
    for i in range(n):
        if suppressed[i]:
            continue
        keep.append(i)
        rest = np.arange(i + 1, n)
        rest = rest[~suppressed[rest]]
        if rest.size == 0:
            continue
        iw = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        ih = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
        union = areas[i] + areas[rest] - inter
        iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
        suppressed[rest[iou >= threshold]] = True
    return np.asarray(keep, dtype=np.int64)
