"""Image quality metrics on float arrays in [0, 1], (H, W) or (H, W, C)."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from .errors import InputError

METRICS = ("psnr", "ssim", "psnr_y", "ssim_y", "mae")

SSIM_WIN = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mae(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.abs(a - b).mean())


def psnr(a, b, peak: float = 1.0) -> float:
    """Identical inputs give ``inf``."""
    a, b = _pair(a, b)
    mse = float(((a - b) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def rgb_to_y(img) -> np.ndarray:
    """Limited-range BT.601 luma of an RGB image in [0, 1]; returns (H, W) in [16/255, 235/255]."""
    img = np.asarray(img, dtype=np.float64)
    return (img[..., 0] * 65.481 + img[..., 1] * 128.553 + img[..., 2] * 24.966 + 16.0) / 255.0


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2
    w = np.exp(-(r**2) / (2 * sigma**2))
    return w / w.sum()


def _filter_valid(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    pad = len(w) // 2
    y = correlate1d(correlate1d(x, w, axis=0, mode="reflect"), w, axis=1, mode="reflect")
    return y[pad:-pad, pad:-pad]


def _ssim_plane(a: np.ndarray, b: np.ndarray, data_range: float) -> float:
    w = gaussian_window()
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, w), _filter_valid(b, w)
    saa = _filter_valid(a * a, w) - mu_a**2
    sbb = _filter_valid(b * b, w) - mu_b**2
    sab = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
    return float((num / den).mean())


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean SSIM over the valid region of an 11x11 Gaussian window, averaged over channels."""
    a, b = _pair(a, b)
    if a.shape[0] < SSIM_WIN or a.shape[1] < SSIM_WIN:
        raise InputError(f"image {a.shape[:2]} smaller than the {SSIM_WIN}x{SSIM_WIN} SSIM window")
    if a.ndim == 2:
        return _ssim_plane(a, b, data_range)
    return float(np.mean([_ssim_plane(a[..., c], b[..., c], data_range) for c in range(a.shape[-1])]))


def evaluate_pair(restored, target, names=METRICS) -> dict[str, float]:
    unknown = [n for n in names if n not in METRICS]
    if unknown:
        raise InputError(f"unknown metric(s) {unknown}; choose from {list(METRICS)}")
    out = {}
    for name in names:
        if name == "psnr":
            out[name] = psnr(restored, target)
        elif name == "ssim":
            out[name] = ssim(restored, target)
        elif name == "psnr_y":
            out[name] = psnr(rgb_to_y(restored), rgb_to_y(target))
        elif name == "ssim_y":
            out[name] = ssim(rgb_to_y(restored), rgb_to_y(target))
        else:
            out[name] = mae(restored, target)
    return out
