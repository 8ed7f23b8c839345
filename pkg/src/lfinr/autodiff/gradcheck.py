"""Central finite-difference check of tape gradients."""
from __future__ import annotations

import numpy as np

from .tensor import Tape, Tensor, backward

DENOM_FLOOR = 1e-8


def default_eps(dtype) -> float:
    return 1e-6 if np.dtype(dtype) == np.float64 else 1e-3


def analytic_gradient(f, x: np.ndarray) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` from one taped forward and backward pass."""
    xt = Tensor(np.array(x, copy=True), requires_grad=True)
    with Tape():
        y = f(xt)
    backward(y, [xt])
    return xt.grad.astype(np.float64)


def central_difference(f, x: np.ndarray, eps: float | None = None) -> np.ndarray:
    """``(f(x + eps e_i) - f(x - eps e_i)) / 2eps`` for every coordinate ``i``."""
    x = np.array(x, copy=True)
    if eps is None:
        eps = default_eps(x.dtype)
    numeric = np.empty(x.size)
    flat = x.reshape(-1)
    for i in range(x.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(Tensor(x.copy())).data)
        flat[i] = orig - eps
        fm = float(f(Tensor(x.copy())).data)
        flat[i] = orig
        # Divide by the step actually taken after rounding to the working precision.
        step = float(x.dtype.type(orig + eps)) - float(x.dtype.type(orig - eps))
        numeric[i] = (fp - fm) / step
    return numeric.reshape(x.shape)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max over coordinates of ``|a - n| / max(|a|, |n|, 1e-8)``."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.shape != n.shape:
        raise ValueError(f"gradient sizes differ: {a.shape} vs {n.shape}")
    if not a.size:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), DENOM_FLOOR)
    return float(np.max(np.abs(a - n) / denom))


def finite_difference_check(f, x: np.ndarray, eps: float | None = None) -> float:
    """Max relative error between backward gradients of ``f`` and central differences.

    ``f`` maps a :class:`Tensor` to a scalar :class:`Tensor`; both the taped
    pass and the differences run in the dtype of ``x``.
    """
    return relative_error(analytic_gradient(f, x), central_difference(f, x, eps))
