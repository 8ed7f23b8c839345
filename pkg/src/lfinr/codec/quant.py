"""Per-tensor affine quantization to b-bit symbols.

``S = (max - min) / 2**b`` and ``q = round((x - min) / S)``, clamped to
``2**b - 1`` because the top endpoint would otherwise map to ``2**b``.
Reconstruction is ``q * S + min``, so the error is at most ``S / 2`` except
for clamped values near the maximum, where it is at most ``S``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class QuantRecord:
    shape: tuple[int, ...]
    vmin: float  # float32-representable
    vmax: float
    bits: int
    symbols: np.ndarray  # kept positions only, flat order
    mask: np.ndarray | None = None  # None: every position kept

    @property
    def scale(self) -> float:
        return quant_scale(self.vmin, self.vmax, self.bits)


def quant_scale(vmin: float, vmax: float, bits: int) -> float:
    if vmax == vmin:
        return 1.0
    return (float(vmax) - float(vmin)) / float(1 << bits)


def quantize_tensor(values: np.ndarray, bits: int, mask: np.ndarray | None = None) -> QuantRecord:
    if not 1 <= bits <= 16:
        raise ValueError(f"quantization bits must be in [1, 16], got {bits}")
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot quantize non-finite values")
    flat = values.ravel()
    kept = flat if mask is None else flat[np.asarray(mask).ravel() != 0]
    if kept.size:
        vmin = float(np.float32(kept.min()))
        vmax = float(np.float32(kept.max()))
    else:
        vmin = vmax = 0.0
    # float32 rounding of an extreme can move it past float64 data; clamp handles both ends.
    s = quant_scale(vmin, vmax, bits)
    if vmax == vmin:
        symbols = np.zeros(kept.size, dtype=np.int64)
    else:
        q = np.rint((kept.astype(np.float64) - vmin) / s)
        symbols = np.clip(q, 0, (1 << bits) - 1).astype(np.int64)
    return QuantRecord(tuple(values.shape), vmin, vmax, bits, symbols,
                       None if mask is None else np.asarray(mask).astype(np.uint8))


def dequantize(rec: QuantRecord) -> np.ndarray:
    """float64 reconstruction; pruned positions are exactly 0."""
    symbols = np.asarray(rec.symbols)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= (1 << rec.bits)):
        raise ValueError("quantization symbol out of range")
    vals = symbols.astype(np.float64) * rec.scale + rec.vmin
    if rec.mask is None:
        if vals.size != int(np.prod(rec.shape)):
            raise ValueError("symbol count does not match tensor size")
        return vals.reshape(rec.shape)
    mask = rec.mask.ravel() != 0
    if int(mask.sum()) != vals.size:
        raise ValueError("symbol count does not match kept positions")
    out = np.zeros(mask.size)
    out[mask] = vals
    return out.reshape(rec.shape)
