"""Deterministic synthetic light fields for desk-scale experiments."""
from __future__ import annotations

import numpy as np

from .lightfield import LightField


def synth_lightfield(seed: int = 0, U: int = 3, V: int = 3, H: int = 24, W: int = 32,
                     n_rects: int = 3, disparity: float = 1.0) -> LightField:
    """Smooth background gradient plus textured rectangles with parallax.

    Each rectangle gets its own depth; its offset moves by
    ``disparity * depth`` pixels per angular step, relative to the grid
    center. ``disparity=0`` yields identical views.
    """
    if min(U, V, H, W) < 1:
        raise ValueError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, H), np.linspace(0.0, 1.0, W), indexing="ij")

    c0 = rng.uniform(0.15, 0.45, 3)
    cy = rng.uniform(0.1, 0.35, 3)
    cx = rng.uniform(0.1, 0.35, 3)
    background = c0 + yy[..., None] * cy + xx[..., None] * cx

    rects = []
    for _ in range(n_rects):
        rh = rng.uniform(0.25, 0.5) * H
        rw = rng.uniform(0.25, 0.5) * W
        top = rng.uniform(0.0, H - rh)
        left = rng.uniform(0.0, W - rw)
        color = rng.uniform(0.2, 0.8, 3)
        freq = rng.uniform(0.15, 0.45, 2)
        phase = rng.uniform(0, 2 * np.pi)
        depth = rng.uniform(-1.0, 1.0)
        rects.append((top, left, rh, rw, color, freq, phase, depth))

    uc, vc = (U - 1) / 2.0, (V - 1) / 2.0
    views = np.empty((U, V, H, W, 3), dtype=np.float64)
    rows = np.arange(H, dtype=np.float64)[:, None]
    cols = np.arange(W, dtype=np.float64)[None, :]
    for u in range(U):
        for v in range(V):
            img = background.copy()
            for top, left, rh, rw, color, freq, phase, depth in rects:
                t = top + disparity * depth * (u - uc)
                l = left + disparity * depth * (v - vc)
                inside = (rows >= t) & (rows < t + rh) & (cols >= l) & (cols < l + rw)
                # Texture is attached to the rectangle, so it moves with it.
                tex = 0.5 + 0.5 * np.sin(freq[0] * (rows - t) * np.pi + phase) \
                    * np.cos(freq[1] * (cols - l) * np.pi)
                patch = color * (0.75 + 0.25 * tex[..., None])
                img = np.where(inside[..., None], patch, img)
            views[u, v] = img
    return LightField(np.clip(views, 0.0, 1.0).astype(np.float32))
