"""Light-field container and view-grid helpers.

A sub-aperture image (SAI) is an ``(H, W, 3)`` float array in ``[0, 1]``.
A :class:`LightField` stacks the ``U x V`` grid of them into one
``(U, V, H, W, 3)`` array.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class AngularCoord(NamedTuple):
    u: int
    v: int


@dataclass(frozen=True)
class LightField:
    views: np.ndarray  # (U, V, H, W, 3)

    def __post_init__(self):
        if self.views.ndim != 5 or self.views.shape[-1] != 3:
            raise ValueError(f"expected (U, V, H, W, 3) views, got shape {self.views.shape}")
        if not np.all(np.isfinite(self.views)):
            raise ValueError("light field contains non-finite samples")
        if self.views.size and (self.views.min() < 0.0 or self.views.max() > 1.0):
            raise ValueError("light field samples must lie in [0, 1]")

    @property
    def U(self) -> int:
        return self.views.shape[0]

    @property
    def V(self) -> int:
        return self.views.shape[1]

    @property
    def H(self) -> int:
        return self.views.shape[2]

    @property
    def W(self) -> int:
        return self.views.shape[3]

    @property
    def num_pixels(self) -> int:
        return self.U * self.V * self.H * self.W

    def view(self, u: int, v: int) -> np.ndarray:
        return self.views[u, v]

    def coords(self):
        return [AngularCoord(u, v) for u in range(self.U) for v in range(self.V)]


def select_central_views(lf: LightField, rows: int, cols: int) -> LightField:
    """Keep the centered ``rows x cols`` window of the view grid."""
    du, dv = lf.U - rows, lf.V - cols
    if rows < 1 or cols < 1 or du < 0 or dv < 0:
        raise ValueError(f"window {rows}x{cols} does not fit in a {lf.U}x{lf.V} grid")
    if du % 2 or dv % 2:
        raise ValueError(f"window {rows}x{cols} cannot be centered in a {lf.U}x{lf.V} grid")
    return LightField(lf.views[du // 2:du // 2 + rows, dv // 2:dv // 2 + cols].copy())


def crop_center(img: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Crop the spatial center of an ``(H, W, ...)`` image.

    The odd pixel of an uneven margin goes to the bottom/right edge.
    """
    h, w = img.shape[:2]
    if target_h > h or target_w > w or target_h < 1 or target_w < 1:
        raise ValueError(f"cannot crop {h}x{w} to {target_h}x{target_w}")
    top = (h - target_h) // 2
    left = (w - target_w) // 2
    return img[top:top + target_h, left:left + target_w]


def serpentine_order(rows: int, cols: int) -> list[AngularCoord]:
    """Boustrophedon scan: even rows left-to-right, odd rows right-to-left."""
    order = []
    for u in range(rows):
        vs = range(cols) if u % 2 == 0 else range(cols - 1, -1, -1)
        order.extend(AngularCoord(u, v) for v in vs)
    return order
