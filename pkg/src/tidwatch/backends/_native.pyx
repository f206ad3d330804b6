# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel core: direct (no-im2col) valid convolution plus 2x2 pooling.

For the small channel counts this classifier uses, direct loops beat
im2col+GEMM because they avoid materializing the k^2-inflated patch
matrix; the hot inner loops are contiguous row AXPYs / dot products that
the C compiler vectorizes. Work is threaded (OpenMP) over disjoint output
slots only - each output element is accumulated by exactly one thread in a
fixed order - so results are bit-identical for any thread count.

All kernels accept optional preallocated output buffers (`*_buf`);
training loops reuse them across steps to avoid refaulting fresh pages.
"""
import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange

NAME = "native"


cdef inline int out_size(int size, int kernel, int stride) nogil:
    return (size - kernel) // stride + 1


cdef object take_buf(object buf, tuple shape, object dtype):
    """Return a validated caller buffer or a fresh array."""
    if buf is None:
        return np.empty(shape, dtype=dtype)
    if not isinstance(buf, np.ndarray) or buf.shape != shape or buf.dtype != dtype:
        raise ValueError(f"workspace buffer must be {np.dtype(dtype)}{shape}")
    return buf


def conv2d_forward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                   const double[::1] b, int stride=1, out_buf=None):
    cdef int batch = x.shape[0], cin = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef int cout = w.shape[0], kernel = w.shape[2]
    if w.shape[1] != cin or w.shape[3] != kernel:
        raise ValueError("weight shape incompatible with input")
    if h < kernel or wid < kernel:
        raise ValueError(f"spatial size {h}x{wid} smaller than kernel {kernel}")
    cdef int ho = out_size(h, kernel, stride), wo = out_size(wid, kernel, stride)

    out_arr = take_buf(out_buf, (batch, cout, ho, wo), np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef int plane = ho * wo
    cdef int slot, n, co, c, i, j, u, v
    cdef double wv, bias
    cdef double* orow
    cdef const double* xrow
    with nogil:
        for slot in prange(batch * cout, schedule="static"):
            n = slot // cout
            co = slot % cout
            bias = b[co]
            orow = &out[n, co, 0, 0]
            for i in range(plane):
                orow[i] = bias
            for c in range(cin):
                for u in range(kernel):
                    for v in range(kernel):
                        wv = w[co, c, u, v]
                        for i in range(ho):
                            orow = &out[n, co, i, 0]
                            xrow = &x[n, c, i * stride + u, v]
                            if stride == 1:
                                for j in range(wo):
                                    orow[j] += wv * xrow[j]
                            else:
                                for j in range(wo):
                                    orow[j] += wv * xrow[j * stride]
    return out_arr


def conv2d_backward(const double[:, :, :, ::1] x, const double[:, :, :, ::1] w,
                    const double[:, :, :, ::1] grad_out, int stride=1,
                    bint need_grad_input=True, gx_buf=None):
    cdef int batch = x.shape[0], cin = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef int cout = w.shape[0], kernel = w.shape[2]
    cdef int ho = grad_out.shape[2], wo = grad_out.shape[3]

    grad_w_arr = np.zeros((cout, cin, kernel, kernel), dtype=np.float64)
    grad_b_arr = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, :, ::1] grad_w = grad_w_arr
    cdef double[::1] grad_b = grad_b_arr
    cdef int n, c, co, i, j, u, v, tail
    cdef double acc, a0, a1, a2, a3, wv
    cdef const double* grow
    cdef const double* xrow
    cdef double* gxrow

    with nogil:
        # one thread owns each output channel: grad_w[co] and grad_b[co]
        # are accumulated in a fixed (n, i, j) order regardless of threads.
        # The dot products run in four independent lanes so they vectorize
        # without reassociating within a lane.
        for co in prange(cout, schedule="static"):
            for n in range(batch):
                grow = &grad_out[n, co, 0, 0]
                acc = 0.0
                for i in range(ho * wo):
                    acc = acc + grow[i]
                grad_b[co] += acc
                for c in range(cin):
                    for u in range(kernel):
                        for v in range(kernel):
                            a0 = 0.0
                            a1 = 0.0
                            a2 = 0.0
                            a3 = 0.0
                            for i in range(ho):
                                grow = &grad_out[n, co, i, 0]
                                xrow = &x[n, c, i * stride + u, v]
                                if stride == 1:
                                    tail = wo - (wo & 3)
                                    for j in range(0, tail, 4):
                                        a0 = a0 + grow[j] * xrow[j]
                                        a1 = a1 + grow[j + 1] * xrow[j + 1]
                                        a2 = a2 + grow[j + 2] * xrow[j + 2]
                                        a3 = a3 + grow[j + 3] * xrow[j + 3]
                                    for j in range(tail, wo):
                                        a0 = a0 + grow[j] * xrow[j]
                                else:
                                    for j in range(wo):
                                        a0 = a0 + grow[j] * xrow[j * stride]
                            grad_w[co, c, u, v] += ((a0 + a1) + (a2 + a3))

    if not need_grad_input:
        return None, grad_w_arr, grad_b_arr

    grad_x_arr = take_buf(gx_buf, (batch, cin, h, wid), np.float64)
    cdef double[:, :, :, ::1] grad_x = grad_x_arr
    cdef int hw = h * wid
    with nogil:
        # one thread owns each batch item's grad_x plane
        for n in prange(batch, schedule="static"):
            gxrow = &grad_x[n, 0, 0, 0]
            for i in range(cin * hw):
                gxrow[i] = 0.0
            for co in range(cout):
                for c in range(cin):
                    for u in range(kernel):
                        for v in range(kernel):
                            wv = w[co, c, u, v]
                            for i in range(ho):
                                grow = &grad_out[n, co, i, 0]
                                gxrow = &grad_x[n, c, i * stride + u, v]
                                if stride == 1:
                                    for j in range(wo):
                                        gxrow[j] += wv * grow[j]
                                else:
                                    for j in range(wo):
                                        gxrow[j * stride] += wv * grow[j]
    return grad_x_arr, grad_w_arr, grad_b_arr


def maxpool2d_forward(const double[:, :, :, ::1] x, out_buf=None, arg_buf=None):
    cdef int b = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef int ho = h // 2, wo = w // 2
    if ho < 1 or wo < 1:
        raise ValueError("input too small for 2x2 pooling")
    out_arr = take_buf(out_buf, (b, c, ho, wo), np.float64)
    arg_arr = take_buf(arg_buf, (b, c, ho, wo), np.int64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, :, ::1] arg = arg_arr
    cdef int slot, n, ch, i, j, u, v, bi, bj
    cdef double best, val
    with nogil:
        for slot in prange(b * c, schedule="static"):
            n = slot // c
            ch = slot % c
            for i in range(ho):
                for j in range(wo):
                    best = x[n, ch, 2 * i, 2 * j]
                    bi = 2 * i
                    bj = 2 * j
                    for u in range(2):
                        for v in range(2):
                            val = x[n, ch, 2 * i + u, 2 * j + v]
                            if val > best:
                                best = val
                                bi = 2 * i + u
                                bj = 2 * j + v
                    out[n, ch, i, j] = best
                    arg[n, ch, i, j] = bi * w + bj
    return out_arr, arg_arr


def maxpool2d_backward(const double[:, :, :, ::1] grad_out,
                       const cnp.int64_t[:, :, :, ::1] argmax, int h, int w,
                       gx_buf=None):
    cdef int b = grad_out.shape[0], c = grad_out.shape[1]
    cdef int ho = grad_out.shape[2], wo = grad_out.shape[3]
    grad_x_arr = take_buf(gx_buf, (b, c, h, w), np.float64)
    cdef double[:, :, :, ::1] grad_x = grad_x_arr
    cdef int slot, n, ch, i, j
    cdef cnp.int64_t flat
    cdef double* plane
    with nogil:
        for slot in prange(b * c, schedule="static"):
            n = slot // c
            ch = slot % c
            plane = &grad_x[n, ch, 0, 0]
            for i in range(h * w):
                plane[i] = 0.0
            for i in range(ho):
                for j in range(wo):
                    flat = argmax[n, ch, i, j]
                    plane[flat] += grad_out[n, ch, i, j]
    return grad_x_arr
