"""Image quality metrics over numpy images in [0, 1]: PSNR (capped) and
single-scale SSIM with the standard 11x11 Gaussian window."""

import numpy as np
from scipy.signal import fftconvolve

from .errors import DimensionError

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return pred, target


def psnr(pred, target) -> float:
    """10 log10(1 / MSE) in dB, capped at 100 for (near-)identical images."""
    pred, target = _check_pair(pred, target)
    mse = float(np.mean((pred - target) ** 2))
    if mse <= 10.0 ** (-PSNR_CAP / 10.0):
        return PSNR_CAP
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _ssim_single(x, y, win):
    mu_x = fftconvolve(x, win, mode="valid")
    mu_y = fftconvolve(y, win, mode="valid")
    xx = fftconvolve(x * x, win, mode="valid") - mu_x**2
    yy = fftconvolve(y * y, win, mode="valid") - mu_y**2
    xy = fftconvolve(x * y, win, mode="valid") - mu_x * mu_y
    num = (2 * mu_x * mu_y + SSIM_C1) * (2 * xy + SSIM_C2)
    den = (mu_x**2 + mu_y**2 + SSIM_C1) * (xx + yy + SSIM_C2)
    return num / den


def ssim(pred, target) -> float:
    """Mean single-scale SSIM over channels and valid window positions."""
    pred, target = _check_pair(pred, target)
    if pred.ndim == 2:
        pred, target = pred[..., None], target[..., None]
    if pred.ndim != 3:
        raise DimensionError(f"expected (H, W) or (H, W, C), got {pred.shape}")
    h, w = pred.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise DimensionError(f"image ({h}, {w}) smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    win = _gaussian_window()
    maps = [_ssim_single(pred[..., c], target[..., c], win) for c in range(pred.shape[2])]
    return float(np.mean(maps))
