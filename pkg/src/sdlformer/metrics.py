"""PSNR and SSIM on magnitude images."""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError
from .tensor import Tensor

# differences below this fraction of the peak are storage round-off (complex64)
EXACT_REL_TOL = 1e-6


def magnitude(img) -> np.ndarray:
    """``|x|`` of a ``[2, H, W]`` complex image."""
    a = img.data if isinstance(img, Tensor) else np.asarray(img)
    a = a.astype(np.float64)
    return np.sqrt(a[0] ** 2 + a[1] ** 2)


def _pair(ref, test):
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape or ref.ndim != 2:
        raise ShapeError(f"metric inputs must be equal 2-D shapes, got {ref.shape} and {test.shape}")
    return ref, test


def psnr(ref, test) -> float:
    """``10 log10(max(ref)^2 / MSE)``; ``inf`` when the images agree exactly."""
    ref, test = _pair(ref, test)
    mse = float(np.mean((ref - test) ** 2))
    peak = float(ref.max())
    if mse <= (EXACT_REL_TOL * peak) ** 2:
        return math.inf
    return 10.0 * math.log10(peak**2 / mse)


def _box_means(a: np.ndarray, win: int) -> np.ndarray:
    """Means over every fully-contained ``win x win`` window."""
    c = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    c[1:, 1:] = a.cumsum(0).cumsum(1)
    s = c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]
    return s / (win * win)


def ssim(ref, test, win: int = 7, k1: float = 0.01, k2: float = 0.03,
         data_range: float | None = None) -> float:
    """Mean SSIM over all valid ``win x win`` uniform windows.

    ``data_range`` defaults to ``max(ref)``; local (co)variances use the
    unbiased ``N / (N - 1)`` correction.
    """
    ref, test = _pair(ref, test)
    if min(ref.shape) < win:
        raise ShapeError(f"image {ref.shape} is smaller than the {win}x{win} SSIM window")
    if np.array_equal(ref, test):
        return 1.0
    L = float(ref.max()) if data_range is None else float(data_range)
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    n = win * win
    cov_norm = n / (n - 1)
    ux, uy = _box_means(ref, win), _box_means(test, win)
    vx = cov_norm * (_box_means(ref * ref, win) - ux * ux)
    vy = cov_norm * (_box_means(test * test, win) - uy * uy)
    vxy = cov_norm * (_box_means(ref * test, win) - ux * uy)
    num = (2 * ux * uy + c1) * (2 * vxy + c2)
    den = (ux**2 + uy**2 + c1) * (vx + vy + c2)
    return float(np.mean(num / den))
