"""Differentiable operators: exactly the set the light-field INR and its loss use."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .tensor import NumericError, Tensor, make_result

DIV_EPS = 1e-12


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    # Only scalar broadcast is supported, so reduce fully or not at all.
    if g.shape == shape:
        return g
    return np.asarray(g.sum(), dtype=g.dtype).reshape(shape)


def _binary_operands(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape} (only scalar broadcast)")
    return a, b


def add(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    return make_result(a.data + b.data, "add", (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    return make_result(a.data - b.data, "sub", (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    return make_result(a.data * b.data, "mul", (a, b),
                       lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = _binary_operands(a, b)
    if np.any(np.abs(b.data) <= DIV_EPS):
        raise NumericError("division by a value with magnitude <= 1e-12")
    out = a.data / b.data

    def backward(g):
        ga = g / b.data
        return _unbroadcast(ga, a.shape), _unbroadcast(-ga * out, b.shape)

    return make_result(out, "div", (a, b), backward)


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return make_result(np.asarray(x.data.sum(), dtype=x.dtype), "sum", (x,),
                       lambda g: (np.full(x.shape, g, dtype=x.dtype),))


def mean(x: Tensor) -> Tensor:
    n = x.size
    return make_result(np.asarray(x.data.mean(), dtype=x.dtype), "mean", (x,),
                       lambda g: (np.full(x.shape, g / n, dtype=x.dtype),))


def abs_mean(x: Tensor) -> Tensor:
    """Mean absolute value; the subgradient at 0 is 0."""
    n = x.size
    return make_result(np.asarray(np.abs(x.data).mean(), dtype=x.dtype), "abs_mean", (x,),
                       lambda g: (np.sign(x.data) * (g / n),))


def sigmoid(x: Tensor) -> Tensor:
    y = expit(x.data)
    return make_result(y, "sigmoid", (x,), lambda g: (g * y * (1 - y),))


def silu(x: Tensor) -> Tensor:
    s = expit(x.data)
    y = x.data * s
    return make_result(y, "silu", (x,), lambda g: (g * s * (1 + x.data * (1 - s)),))


def clamp01(x: Tensor) -> Tensor:
    """Clip to [0, 1]; gradient passes only where the input was inside."""
    y = np.clip(x.data, 0, 1)
    inside = (x.data >= 0) & (x.data <= 1)
    return make_result(y, "clamp01", (x,), lambda g: (g * inside,))


def reshape(x: Tensor, shape) -> Tensor:
    return make_result(x.data.reshape(shape), "reshape", (x,), lambda g: (g.reshape(x.shape),))


def crop2d(x: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    """Spatial slice of a ``(C, H, W)`` tensor."""
    y = x.data[:, top:top + height, left:left + width]

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[:, top:top + height, left:left + width] = g
        return (gx,)

    return make_result(np.ascontiguousarray(y), "crop2d", (x,), backward)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Fully connected layer ``w @ x + b`` on a single feature vector."""
    if w.data.ndim != 2 or x.shape != (w.shape[1],) or b.shape != (w.shape[0],):
        raise ValueError(f"linear shapes x{x.shape} W{w.shape} b{b.shape} do not conform")
    y = w.data @ x.data + b.data
    return make_result(y, "linear", (x, w, b),
                       lambda g: (w.data.T @ g, np.outer(g, x.data), g))


def _im2col3x3(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (C, H, W, 3, 3)
    return win.transpose(0, 3, 4, 1, 2).reshape(c * 9, h * w)


def _col2im3x3(cols: np.ndarray, c: int, h: int, w: int) -> np.ndarray:
    cols = cols.reshape(c, 3, 3, h, w)
    out = np.zeros((c, h + 2, w + 2), dtype=cols.dtype)
    for i in range(3):
        for j in range(3):
            out[:, i:i + h, j:j + w] += cols[:, i, j]
    return out[:, 1:-1, 1:-1]


def conv2d(x: Tensor, k: Tensor, b: Tensor) -> Tensor:
    """3x3 cross-correlation, stride 1, zero padding 1, plus per-channel bias."""
    if x.data.ndim != 3 or k.data.ndim != 4 or k.shape[2:] != (3, 3) \
            or k.shape[1] != x.shape[0] or b.shape != (k.shape[0],):
        raise ValueError(f"conv2d shapes x{x.shape} K{k.shape} b{b.shape} do not conform")
    c, h, w = x.shape
    cout = k.shape[0]
    cols = _im2col3x3(x.data)
    kr = k.data.reshape(cout, c * 9)
    y = (kr @ cols).reshape(cout, h, w) + b.data[:, None, None]

    def backward(g):
        g2 = g.reshape(cout, h * w)
        dk = (g2 @ cols.T).reshape(k.shape)
        db = g2.sum(axis=1)
        dx = _col2im3x3(kr.T @ g2, c, h, w) if x.requires_grad else None
        return dx, dk, db

    return make_result(y, "conv2d", (x, k, b), backward)


def pixel_shuffle(x: Tensor, s: int) -> Tensor:
    """``(C*s*s, H, W) -> (C, s*H, s*W)`` with out[c, s*y+dy, s*x+dx] = in[c*s*s+dy*s+dx, y, x]."""
    cs, h, w = x.shape
    if s < 1 or cs % (s * s):
        raise ValueError(f"{cs} channels not divisible by {s}^2")
    c = cs // (s * s)
    y = x.data.reshape(c, s, s, h, w).transpose(0, 3, 1, 4, 2).reshape(c, h * s, w * s)

    def backward(g):
        return (pixel_unshuffle_array(g, s),)

    return make_result(y, "pixel_shuffle", (x,), backward)


def pixel_unshuffle_array(y: np.ndarray, s: int) -> np.ndarray:
    """Inverse scatter of :func:`pixel_shuffle` on plain arrays."""
    c, hs, ws = y.shape
    h, w = hs // s, ws // s
    return y.reshape(c, h, s, w, s).transpose(0, 2, 4, 1, 3).reshape(c * s * s, h, w)


def separable_filter(x: Tensor, rows: np.ndarray, cols: np.ndarray) -> Tensor:
    """Fixed (non-trainable) separable filter ``rows @ x[c] @ cols.T`` per channel.

    With banded Gaussian matrices this is the valid-mode SSIM window.
    """
    rows = rows.astype(x.dtype, copy=False)
    cols = cols.astype(x.dtype, copy=False)
    y = rows @ x.data @ cols.T
    return make_result(y, "separable_filter", (x,), lambda g: (rows.T @ g @ cols,))
