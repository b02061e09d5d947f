# cython: language_level=3
"""Compiled hot kernels. Mirrors ``_pykernels`` exactly (same signatures, same
accumulation order so results are bit-identical)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


cdef inline void _valid_range(Py_ssize_t off, Py_ssize_t size, int stride, int out_n,
                              Py_ssize_t* lo, Py_ssize_t* hi) noexcept nogil:
    """Output positions o in [lo, hi) read input o * stride + off inside [0, size)."""
    cdef Py_ssize_t a = 0, z
    if off < 0:
        a = (-off + stride - 1) // stride
    if size - off <= 0:
        z = 0
    else:
        z = (size - off + stride - 1) // stride
    if a > out_n:
        a = out_n
    if z > out_n:
        z = out_n
    if z < a:
        z = a
    lo[0] = a
    hi[0] = z


cdef void _im2col(real[:, :, :, ::1] x, real[:, ::1] cols, int kh, int kw, int stride,
                  int dilation, int pad_top, int pad_left, int out_h, int out_w) noexcept nogil:
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ci, i, j, bi, oy, ox, iy, off, lo, hi
    cdef Py_ssize_t ncols = cols.shape[1]
    cdef real* src
    cdef real* dst
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                dst = &cols[(ci * kh + i) * kw + j, 0]
                off = j * dilation - pad_left
                _valid_range(off, w, stride, out_w, &lo, &hi)
                for bi in range(b):
                    for oy in range(out_h):
                        iy = oy * stride + i * dilation - pad_top
                        if iy < 0 or iy >= h:
                            for ox in range(out_w):
                                dst[ox] = 0
                        else:
                            src = &x[bi, ci, iy, 0]
                            for ox in range(lo):
                                dst[ox] = 0
                            for ox in range(lo, hi):
                                dst[ox] = src[ox * stride + off]
                            for ox in range(hi, out_w):
                                dst[ox] = 0
                        dst += out_w


cdef void _col2im(real[:, ::1] cols, real[:, :, :, ::1] out, int kh, int kw, int stride,
                  int dilation, int pad_top, int pad_left, int out_h, int out_w) noexcept nogil:
    cdef Py_ssize_t b = out.shape[0], c = out.shape[1], h = out.shape[2], w = out.shape[3]
    cdef Py_ssize_t ci, i, j, bi, oy, ox, iy, off, lo, hi
    cdef real* src
    cdef real* dst
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                src = &cols[(ci * kh + i) * kw + j, 0]
                off = j * dilation - pad_left
                _valid_range(off, w, stride, out_w, &lo, &hi)
                for bi in range(b):
                    for oy in range(out_h):
                        iy = oy * stride + i * dilation - pad_top
                        if iy >= 0 and iy < h:
                            dst = &out[bi, ci, iy, 0]
                            for ox in range(lo, hi):
                                dst[ox * stride + off] += src[ox]
                        src += out_w


def im2col(x, int kh, int kw, int stride, int dilation, int pad_top, int pad_left,
           int out_h, int out_w):
    x = np.ascontiguousarray(x)
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1]
    cols = np.empty((c * kh * kw, b * out_h * out_w), dtype=x.dtype)
    if x.dtype == np.float32:
        _im2col[float](x, cols, kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w)
    elif x.dtype == np.float64:
        _im2col[double](x, cols, kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w)
    else:
        raise TypeError(f"unsupported dtype {x.dtype}")
    return cols


def col2im(cols, x_shape, int kh, int kw, int stride, int dilation, int pad_top, int pad_left,
           int out_h, int out_w):
    cols = np.ascontiguousarray(cols)
    out = np.zeros(tuple(x_shape), dtype=cols.dtype)
    if cols.dtype == np.float32:
        _col2im[float](cols, out, kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w)
    elif cols.dtype == np.float64:
        _col2im[double](cols, out, kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w)
    else:
        raise TypeError(f"unsupported dtype {cols.dtype}")
    return out


cdef void _pool_fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] out, signed char[:, :, :, ::1] idx) noexcept nogil:
    cdef Py_ssize_t b = out.shape[0], c = out.shape[1], h2 = out.shape[2], w2 = out.shape[3]
    cdef Py_ssize_t bi, ci, y, xx, k
    cdef real best, v
    cdef signed char arg
    for bi in range(b):
        for ci in range(c):
            for y in range(h2):
                for xx in range(w2):
                    best = x[bi, ci, 2 * y, 2 * xx]
                    arg = 0
                    v = x[bi, ci, 2 * y, 2 * xx + 1]
                    if v > best:
                        best = v
                        arg = 1
                    v = x[bi, ci, 2 * y + 1, 2 * xx]
                    if v > best:
                        best = v
                        arg = 2
                    v = x[bi, ci, 2 * y + 1, 2 * xx + 1]
                    if v > best:
                        best = v
                        arg = 3
                    out[bi, ci, y, xx] = best
                    idx[bi, ci, y, xx] = arg


cdef void _pool_bwd(real[:, :, :, ::1] g, signed char[:, :, :, ::1] idx, real[:, :, :, ::1] dx) noexcept nogil:
    cdef Py_ssize_t b = g.shape[0], c = g.shape[1], h2 = g.shape[2], w2 = g.shape[3]
    cdef Py_ssize_t bi, ci, y, xx
    cdef signed char a
    for bi in range(b):
        for ci in range(c):
            for y in range(h2):
                for xx in range(w2):
                    a = idx[bi, ci, y, xx]
                    dx[bi, ci, 2 * y + (a >> 1), 2 * xx + (a & 1)] = g[bi, ci, y, xx]


def maxpool2_forward(x):
    x = np.ascontiguousarray(x)
    cdef Py_ssize_t b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    out = np.empty((b, c, h // 2, w // 2), dtype=x.dtype)
    idx = np.empty((b, c, h // 2, w // 2), dtype=np.int8)
    if x.dtype == np.float32:
        _pool_fwd[float](x, out, idx)
    elif x.dtype == np.float64:
        _pool_fwd[double](x, out, idx)
    else:
        raise TypeError(f"unsupported dtype {x.dtype}")
    return out, idx


def maxpool2_backward(grad, idx, int h, int w):
    grad = np.ascontiguousarray(grad)
    idx = np.ascontiguousarray(idx, dtype=np.int8)
    dx = np.zeros((grad.shape[0], grad.shape[1], h, w), dtype=grad.dtype)
    if grad.dtype == np.float32:
        _pool_bwd[float](grad, idx, dx)
    elif grad.dtype == np.float64:
        _pool_bwd[double](grad, idx, dx)
    else:
        raise TypeError(f"unsupported dtype {grad.dtype}")
    return dx


def iou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 4))
    cdef double[:, ::1] B = np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] O = out
    cdef double area_a, area_b, iw, ih, inter, union
    with nogil:
        for i in range(n):
            area_a = (A[i, 2] - A[i, 0]) * (A[i, 3] - A[i, 1])
            for j in range(m):
                area_b = (B[j, 2] - B[j, 0]) * (B[j, 3] - B[j, 1])
                iw = min(A[i, 2], B[j, 2]) - max(A[i, 0], B[j, 0])
                ih = min(A[i, 3], B[j, 3]) - max(A[i, 1], B[j, 1])
                if iw < 0:
                    iw = 0
                if ih < 0:
                    ih = 0
                inter = iw * ih
                union = area_a + area_b - inter
                O[i, j] = inter / union if union > 0 else 0.0
    return out


def nms_sorted(boxes, double threshold):
    cdef double[:, ::1] bx = np.ascontiguousarray(np.asarray(boxes, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = bx.shape[0], i, j, nkeep = 0
    keep = np.empty(n, dtype=np.int64)
    cdef long long[::1] K = keep
    supp = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] S = supp
    areas_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] areas = areas_arr
    cdef double iw, ih, inter, union, iou
    with nogil:
        for i in range(n):
            areas[i] = (bx[i, 2] - bx[i, 0]) * (bx[i, 3] - bx[i, 1])
        for i in range(n):
            if S[i]:
                continue
            K[nkeep] = i
            nkeep += 1
            for j in range(i + 1, n):
                if S[j]:
                    continue
                iw = min(bx[i, 2], bx[j, 2]) - max(bx[i, 0], bx[j, 0])
                ih = min(bx[i, 3], bx[j, 3]) - max(bx[i, 1], bx[j, 1])
                if iw < 0:
                    iw = 0
                if ih < 0:
                    ih = 0
                inter = iw * ih
                union = areas[i] + areas[j] - inter
                iou = inter / union if union > 0 else 0.0
                if iou >= threshold:
                    S[j] = 1
    return keep[:nkeep].copy()
