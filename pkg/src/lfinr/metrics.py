"""Quality metrics: PSNR, SSIM, and the light-field YUV-PSNR / Y-SSIM report."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .color import rgb_to_yuv444
from .lightfield import LightField

PSNR_CAP = 100.0
# Per-plane weights (Y, U, V) for YUV-PSNR.
YUV_WEIGHTS = (6.0, 1.0, 1.0)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def valid_filter_matrix(n: int, size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Banded ``(n - size + 1, n)`` matrix applying the 1-D Gaussian at valid offsets.

    Filtering a plane ``X`` with the separable 2-D window is then
    ``A_h @ X @ A_w.T``.
    """
    if n < size:
        raise ValueError(f"plane extent {n} smaller than the {size}-tap SSIM window")
    g = gaussian_window(size, sigma)
    m = np.zeros((n - size + 1, n))
    for i in range(n - size + 1):
        m[i, i:i + size] = g
    return m


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM over the fully-overlapping window positions of two 2-D planes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"expected two equal 2-D planes, got {a.shape} and {b.shape}")
    ah = valid_filter_matrix(a.shape[0])
    aw = valid_filter_matrix(a.shape[1])

    def filt(x):
        return ah @ x @ aw.T

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a ** 2
    var_b = filt(b * b) - mu_b ** 2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class QualityReport:
    psnr_y: list[float] = field(default_factory=list)
    psnr_u: list[float] = field(default_factory=list)
    psnr_v: list[float] = field(default_factory=list)
    yuv_psnr: list[float] = field(default_factory=list)
    y_ssim: list[float] = field(default_factory=list)
    bpp: float | None = None

    @property
    def mean_yuv_psnr(self) -> float:
        return float(np.mean(self.yuv_psnr))

    @property
    def mean_y_ssim(self) -> float:
        return float(np.mean(self.y_ssim))

    def summary(self) -> dict:
        out = {
            "yuv_psnr": self.mean_yuv_psnr,
            "y_ssim": self.mean_y_ssim,
            "psnr_y": float(np.mean(self.psnr_y)),
            "psnr_u": float(np.mean(self.psnr_u)),
            "psnr_v": float(np.mean(self.psnr_v)),
        }
        if self.bpp is not None:
            out["bpp"] = self.bpp
        return out

    def to_dict(self) -> dict:
        return {**asdict(self), "mean": self.summary()}


def weighted_yuv_psnr(py: float, pu: float, pv: float, weights=YUV_WEIGHTS) -> float:
    wy, wu, wv = weights
    return (wy * py + wu * pu + wv * pv) / (wy + wu + wv)


def bits_per_pixel(num_bytes: int, lf_or_pixels) -> float:
    pixels = lf_or_pixels if isinstance(lf_or_pixels, int) else lf_or_pixels.num_pixels
    return 8.0 * num_bytes / pixels


def evaluate(ref: LightField, rec: LightField, stream_bytes: int | None = None,
             weights=YUV_WEIGHTS) -> QualityReport:
    """Per-view YUV-PSNR and Y-SSIM of ``rec`` against ``ref``."""
    if ref.views.shape != rec.views.shape:
        raise ValueError(f"light field shapes differ: {ref.views.shape} vs {rec.views.shape}")
    report = QualityReport()
    for u in range(ref.U):
        for v in range(ref.V):
            a = rgb_to_yuv444(ref.views[u, v])
            b = rgb_to_yuv444(rec.views[u, v])
            py, pu, pv = (psnr(a[..., k], b[..., k]) for k in range(3))
            report.psnr_y.append(py)
            report.psnr_u.append(pu)
            report.psnr_v.append(pv)
            report.yuv_psnr.append(weighted_yuv_psnr(py, pu, pv, weights))
            report.y_ssim.append(ssim(a[..., 0], b[..., 0]))
    if stream_bytes is not None:
        report.bpp = bits_per_pixel(stream_bytes, ref)
    return report
