"""Pure-numpy kernel implementations.

These are the fallback used when the compiled extension is unavailable and
the semantic reference the extension is tested against. Convolutions are
"valid" (no padding) with a square kernel, implemented by im2col + matmul;
pooling is fixed 2x2 / stride 2.

Layouts: activations (B, C, H, W), conv weights (Cout, Cin, k, k), all
C-contiguous float arrays. The optional `*_buf` arguments accept
preallocated outputs so hot loops can avoid repeated large allocations.
"""
from __future__ import annotations

import numpy as np

NAME = "reference"


def _out_size(size: int, kernel: int, stride: int) -> int:
    if size < kernel:
        raise ValueError(f"spatial size {size} smaller than kernel {kernel}")
    return (size - kernel) // stride + 1


def _take_buf(buf: np.ndarray | None, shape: tuple, dtype) -> np.ndarray:
    if buf is None:
        return np.empty(shape, dtype=dtype)
    if not isinstance(buf, np.ndarray) or buf.shape != shape or buf.dtype != dtype:
        raise ValueError(f"workspace buffer must be {np.dtype(dtype)}{shape}")
    return buf


def _im2col(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Unfold x into (B*Ho*Wo, Cin*k*k) patch rows."""
    b, cin, h, w = x.shape
    ho = _out_size(h, kernel, stride)
    wo = _out_size(w, kernel, stride)
    windows = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]          # (B, Cin, Ho, Wo, k, k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5)           # (B, Ho, Wo, Cin, k, k)
    return np.ascontiguousarray(cols).reshape(b * ho * wo, cin * kernel * kernel)


def conv2d_forward(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    stride: int = 1,
    out_buf: np.ndarray | None = None,
) -> np.ndarray:
    batch, cin, h, wid = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w or kh != kw:
        raise ValueError("weight shape incompatible with input")
    ho = _out_size(h, kh, stride)
    wo = _out_size(wid, kh, stride)
    flat = _im2col(x, kh, stride) @ w.reshape(cout, -1).T
    flat += b
    out = _take_buf(out_buf, (batch, cout, ho, wo), x.dtype)
    np.copyto(out, flat.reshape(batch, ho, wo, cout).transpose(0, 3, 1, 2))
    return out


def conv2d_backward(
    x: np.ndarray,
    w: np.ndarray,
    grad_out: np.ndarray,
    stride: int = 1,
    need_grad_input: bool = True,
    gx_buf: np.ndarray | None = None,
) -> tuple[np.ndarray | None, np.ndarray, np.ndarray]:
    """Gradients of a valid convolution: (grad_x, grad_w, grad_b).

    grad_x is skipped (None) when need_grad_input is false.
    """
    batch, cin, h, wid = x.shape
    cout, _, kernel, _ = w.shape
    _, _, ho, wo = grad_out.shape

    g2d = grad_out.transpose(0, 2, 3, 1).reshape(batch * ho * wo, cout)
    grad_b = g2d.sum(axis=0)

    cols = _im2col(x, kernel, stride)
    grad_w = (g2d.T @ cols).reshape(w.shape)

    if not need_grad_input:
        return None, grad_w, grad_b

    grad_cols = (g2d @ w.reshape(cout, -1)).reshape(batch, ho, wo, cin, kernel, kernel)
    grad_x = _take_buf(gx_buf, x.shape, x.dtype)
    grad_x.fill(0.0)
    # Fold patch gradients back; loop over the k*k offsets keeps the adds vectorized.
    for u in range(kernel):
        for v in range(kernel):
            grad_x[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += (
                grad_cols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
            )
    return grad_x, grad_w, grad_b


def maxpool2d_forward(
    x: np.ndarray, out_buf: np.ndarray | None = None, arg_buf: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """2x2/stride-2 max pooling. Returns (pooled, argmax).

    argmax holds, per output cell, the flat index into that cell's (H, W)
    plane of the winning input pixel; odd trailing rows/columns are dropped.
    """
    b, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    if ho < 1 or wo < 1:
        raise ValueError("input too small for 2x2 pooling")
    tiles = x[:, :, : 2 * ho, : 2 * wo].reshape(b, c, ho, 2, wo, 2)
    tiles = tiles.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho, wo, 4)
    local = tiles.argmax(axis=4)
    out = _take_buf(out_buf, (b, c, ho, wo), x.dtype)
    np.copyto(out, np.take_along_axis(tiles, local[..., None], axis=4)[..., 0])
    rows = 2 * np.arange(ho)[None, None, :, None] + local // 2
    cols = 2 * np.arange(wo)[None, None, None, :] + local % 2
    argmax = _take_buf(arg_buf, (b, c, ho, wo), np.int64)
    np.copyto(argmax, rows * w + cols)
    return out, argmax


def maxpool2d_backward(
    grad_out: np.ndarray,
    argmax: np.ndarray,
    h: int,
    w: int,
    gx_buf: np.ndarray | None = None,
) -> np.ndarray:
    b, c, ho, wo = grad_out.shape
    grad_x = _take_buf(gx_buf, (b, c, h, w), grad_out.dtype)
    grad_x.fill(0.0)
    flat = grad_x.reshape(b, c, h * w)
    np.put_along_axis(
        flat, argmax.reshape(b, c, ho * wo), grad_out.reshape(b, c, ho * wo), axis=2
    )
    return grad_x
