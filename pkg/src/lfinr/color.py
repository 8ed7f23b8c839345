"""RGB to full-range YUV 4:4:4 on [0, 1] floats (BT.709 matrix)."""
import numpy as np

KR, KB = 0.2126, 0.0722
KG = 1.0 - KR - KB
CB_SCALE = 2.0 * (1.0 - KB)  # 1.8556
CR_SCALE = 2.0 * (1.0 - KR)  # 1.5748


def rgb_to_yuv444(img: np.ndarray) -> np.ndarray:
    """Convert ``(..., 3)`` RGB to ``(..., 3)`` YUV planes, clamped to [0, 1]."""
    rgb = np.asarray(img, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = KR * r + KG * g + KB * b
    u = (b - y) / CB_SCALE + 0.5
    v = (r - y) / CR_SCALE + 0.5
    return np.clip(np.stack([y, u, v], axis=-1), 0.0, 1.0)
