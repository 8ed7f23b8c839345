"""Randomized gradient-check instances for every autodiff operator and the loss.

Each case is ``(f, x)`` where ``f`` maps a Tensor to a scalar Tensor. Elementwise
and linear operators are scalarized as ``sum(w * (op(t) - op(x0)))``: subtracting
the value at the base point makes unperturbed outputs cancel exactly, so the
central difference only carries rounding from the outputs that actually move.
"""
from __future__ import annotations

import numpy as np

from lfinr import autodiff as ad
from lfinr.autodiff import Tensor
from lfinr.train import loss_fn

LOSS_ALPHA = 0.7


def _centered(op, x0, w):
    ref = op(Tensor(x0)).data.copy()
    return lambda t: ad.sum_((op(t) - Tensor(ref)) * Tensor(w))


def draw(seed: int) -> dict:
    """Float64 draws for one seed, already rounded through float32.

    Rounding first lets the same point be evaluated in both precisions.
    """
    r = np.random.default_rng(seed)

    def arr(*shape, scale=1.0):
        return (scale * r.standard_normal(shape)).astype(np.float32).astype(np.float64)

    C, H, W = int(r.integers(1, 4)), int(r.integers(1, 6)), int(r.integers(1, 8))
    cout = int(r.integers(1, 4))
    n_in, n_out = int(r.integers(1, 6)), int(r.integers(1, 6))
    s = int(r.integers(1, 3))
    d = {
        "x": arr(C, H, W), "w": arr(C, H, W), "y": arr(C, H, W),
        "K": arr(cout, C, 3, 3, scale=0.5), "b": arr(cout), "wc": arr(cout, H, W),
        "xv": arr(n_in), "Wm": arr(n_out, n_in), "bv": arr(n_out), "wv": arr(n_out),
        "s": s, "xs": arr(C * s * s, H, W), "ws": arr(C, H * s, W * s),
        "rows": r.random((4, H + 3)), "cols": r.random((2, W + 1)),
        "xf": arr(C, H + 3, W + 1), "wf": arr(C, 4, 2),
    }
    y = d["y"]
    d["den"] = (np.abs(y) + 0.5) * np.where(y < 0, -1.0, 1.0)
    # Keep abs away from its kink.
    d["xa"] = d["x"] + np.where(d["x"] < 0, -0.01, 0.01)
    # Values on both sides of [0, 1], none within 0.01 of a kink.
    xc = 0.5 + 0.4 * d["x"]
    for edge in (0.0, 1.0):
        xc = np.where(np.abs(xc - edge) < 0.01, edge + np.where(xc < edge, -0.01, 0.01), xc)
    d["xc"] = xc
    hs, ws_ = int(r.integers(11, 14)), int(r.integers(11, 15))
    gt = r.random((3, hs, ws_))
    pred = np.clip(gt + 0.1 * r.standard_normal(gt.shape), 0.02, 0.98)
    pred = np.where(np.abs(pred - gt) < 0.01, gt + 0.02, pred)
    d["gt"] = gt.astype(np.float32).astype(np.float64)
    d["pred"] = pred.astype(np.float32).astype(np.float64)
    return d


def cases(seed: int, dtype=np.float64) -> dict:
    """Name -> ``(f, x)`` with every array cast to ``dtype``."""
    d = {k: (v.astype(dtype) if isinstance(v, np.ndarray) else v) for k, v in draw(seed).items()}
    T = Tensor
    x, w, y, K, b, wc = d["x"], d["w"], d["y"], d["K"], d["b"], d["wc"]
    xv, Wm, bv, wv = d["xv"], d["Wm"], d["bv"], d["wv"]
    rows, cols = d["rows"], d["cols"]
    out = {
        "conv2d.input": (_centered(lambda t: ad.conv2d(t, T(K), T(b)), x, wc), x),
        "conv2d.kernel": (_centered(lambda t: ad.conv2d(T(x), t, T(b)), K, wc), K),
        "conv2d.bias": (_centered(lambda t: ad.conv2d(T(x), T(K), t), b, wc), b),
        "linear.input": (_centered(lambda t: ad.linear(t, T(Wm), T(bv)), xv, wv), xv),
        "linear.weight": (_centered(lambda t: ad.linear(T(xv), t, T(bv)), Wm, wv), Wm),
        "linear.bias": (_centered(lambda t: ad.linear(T(xv), T(Wm), t), bv, wv), bv),
        "pixel_shuffle": (_centered(lambda t: ad.pixel_shuffle(t, d["s"]), d["xs"], d["ws"]), d["xs"]),
        "silu": (_centered(ad.silu, x, w), x),
        "sigmoid": (_centered(ad.sigmoid, x, w), x),
        "add": (_centered(lambda t: t + T(y), x, w), x),
        "sub": (_centered(lambda t: T(y) - t, x, w), x),
        "mul": (_centered(lambda t: t * T(y), x, w), x),
        "div.numerator": (_centered(lambda t: t / T(d["den"]), x, w), x),
        "div.denominator": (_centered(lambda t: T(x) / t, d["den"], w), d["den"]),
        "reshape": (_centered(lambda t: ad.reshape(t, (-1,)), x, w.ravel()), x),
        "crop2d": (_centered(lambda t: ad.crop2d(t, 2, 1, x.shape[1], x.shape[2]), d["xf"], w), d["xf"]),
        "clamp01": (_centered(ad.clamp01, d["xc"], w), d["xc"]),
        "separable_filter": (
            _centered(lambda t: ad.separable_filter(t, rows, cols), d["xf"], d["wf"]), d["xf"]),
        "mean": (_centered(lambda t: ad.mean(t * T(w)), x, np.ones((), dtype)), x),
        "abs_mean": (lambda t: ad.abs_mean(t), d["xa"]),
        "loss": (lambda t: loss_fn(t, T(d["gt"]), LOSS_ALPHA), d["pred"]),
    }
    return out


OPS = tuple(cases(0).keys())
