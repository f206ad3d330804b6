"""Kernel backend selection.

The compiled core (`_native`, Cython + BLAS) is used when it built and the
arrays are float64; otherwise calls fall through to the numpy reference
implementation. `TIDWATCH_BACKEND=reference|native` forces the choice.
"""
from __future__ import annotations

import os

import numpy as np

from . import reference

try:
    from . import _native
except ImportError:
    _native = None

_forced = os.environ.get("TIDWATCH_BACKEND")
if _forced == "reference":
    _native = None
elif _forced == "native" and _native is None:
    raise ImportError(
        "TIDWATCH_BACKEND=native but the compiled extension is not available; "
        "reinstall with a C compiler and Cython present"
    )
elif _forced not in (None, "", "native", "reference"):
    raise ValueError(f"unknown TIDWATCH_BACKEND value: {_forced!r}")

ACTIVE = "native" if _native is not None else "reference"


def _use_native(*arrays: np.ndarray) -> bool:
    return _native is not None and all(a.dtype == np.float64 for a in arrays)


def conv2d_forward(x, w, b, stride=1, out_buf=None):
    impl = _native if _use_native(x, w, b) else reference
    return impl.conv2d_forward(x, w, b, stride, out_buf)


def conv2d_backward(x, w, grad_out, stride=1, need_grad_input=True, gx_buf=None):
    impl = _native if _use_native(x, w, grad_out) else reference
    return impl.conv2d_backward(x, w, grad_out, stride, need_grad_input, gx_buf)


def maxpool2d_forward(x, out_buf=None, arg_buf=None):
    impl = _native if _use_native(x) else reference
    return impl.maxpool2d_forward(x, out_buf, arg_buf)


def maxpool2d_backward(grad_out, argmax, h, w, gx_buf=None):
    impl = _native if _use_native(grad_out) else reference
    return impl.maxpool2d_backward(grad_out, argmax, h, w, gx_buf)
