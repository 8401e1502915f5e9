"""Multi-coil Cartesian MRI acquisition model.

Images are ``[2, H, W]`` tensors, coil sensitivities and k-space are
``[Nc, 2, H, W]``. The undersampling mask selects whole k-space columns
(phase-encode lines along W).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ResampleError, ShapeError
from .tensor import Tensor

DEFAULT_ACS_FRAC = {4: 0.125, 5: 0.10}


@dataclass(frozen=True, eq=False)
class SamplingMask:
    cols: np.ndarray
    accel: float
    acs: int = 0

    @property
    def width(self) -> int:
        return int(self.cols.size)

    @property
    def n_sampled(self) -> int:
        return int(self.cols.sum())

    @property
    def achieved_accel(self) -> float:
        n = self.n_sampled
        return math.inf if n == 0 else self.width / n

    def acs_cols(self) -> np.ndarray:
        start = self.width // 2 - self.acs // 2
        return np.arange(start, start + self.acs)

    def grid(self, h: int, dtype=np.float64) -> np.ndarray:
        return np.broadcast_to(self.cols.astype(dtype)[None, :], (h, self.width))

    def expand(self, shape: tuple[int, ...], dtype=np.float64) -> np.ndarray:
        """Mask broadcast to a full k-space shape ``[..., H, W]``."""
        if shape[-1] != self.width:
            raise ShapeError(f"mask width {self.width} vs k-space shape {shape}")
        return np.broadcast_to(self.cols.astype(dtype), shape)

    def __eq__(self, other):
        return isinstance(other, SamplingMask) and np.array_equal(self.cols, other.cols)

    def __hash__(self):
        return hash(self.cols.tobytes())


@dataclass(frozen=True)
class SplitMasks:
    m1: SamplingMask
    m2: SamplingMask


def full_mask(w: int) -> SamplingMask:
    return SamplingMask(np.ones(w, dtype=np.uint8), 1.0, acs=w)


def make_mask(w: int, accel: float, acs_frac: float | None = None, seed: int = 0) -> SamplingMask:
    """Random Cartesian column mask with a fully sampled center block."""
    if accel < 1:
        raise ConfigError(f"acceleration must be >= 1, got {accel}")
    if accel == 1:
        return full_mask(w)
    if acs_frac is None:
        acs_frac = DEFAULT_ACS_FRAC.get(int(accel), 0.08)
    if acs_frac * w < 2:
        raise ConfigError(f"acs_frac={acs_frac} gives fewer than 2 center columns at width {w}")
    acs = math.ceil(acs_frac * w - 1e-9)
    total = max(1, round(w / accel))
    if total < acs:
        raise ConfigError(f"{accel}x at width {w} samples {total} columns, fewer than {acs} ACS columns")
    cols = np.zeros(w, dtype=np.uint8)
    start = w // 2 - acs // 2
    cols[start:start + acs] = 1
    rng = np.random.default_rng(seed)
    free = np.flatnonzero(cols == 0)
    cols[rng.choice(free, size=total - acs, replace=False)] = 1
    return SamplingMask(cols, float(accel), acs)


def split_mask(m: SamplingMask, rho: float = 0.6, seed: int = 0) -> SplitMasks:
    """Partition sampled columns into disjoint (input, loss) masks.

    ACS columns always go to the input mask; every other sampled column goes
    there with probability ``rho`` and to the loss mask otherwise.
    """
    if not 0.0 < rho < 1.0:
        raise ConfigError(f"split ratio rho must lie in (0, 1), got {rho}")
    rng = np.random.default_rng(seed)
    acs_set = np.zeros(m.width, dtype=bool)
    acs_set[m.acs_cols()] = True
    candidates = np.flatnonzero((m.cols == 1) & ~acs_set)
    to_input = rng.random(candidates.size) < rho
    c1 = (m.cols == 1) & acs_set
    c1[candidates[to_input]] = True
    c2 = np.zeros(m.width, dtype=bool)
    c2[candidates[~to_input]] = True
    if not c2.any():
        raise ResampleError(f"split with seed {seed} left the loss mask empty")
    m1 = SamplingMask(c1.astype(np.uint8), m.accel, m.acs)
    m2 = SamplingMask(c2.astype(np.uint8), m.accel, 0)
    return SplitMasks(m1, m2)


# ---------------------------------------------------------------------------
# operators


def _const(arr, like: Tensor) -> Tensor:
    if isinstance(arr, Tensor):
        return arr if arr.dtype == like.dtype else Tensor(arr.data, dtype=like.dtype)
    return Tensor(arr, dtype=like.dtype)


def _check_coils(x_shape, s: Tensor) -> None:
    if s.ndim != 4 or s.shape[1] != 2 or s.shape[2:] != tuple(x_shape[-2:]):
        raise ShapeError(f"sensitivities {s.shape} do not match image/k-space {tuple(x_shape)}")


def expand_coils(x: Tensor, s) -> Tensor:
    """Per-coil images ``S_i * x``."""
    if x.ndim != 3 or x.shape[0] != 2:
        raise ShapeError(f"expected a complex image [2, H, W], got {x.shape}")
    s = _const(s, x)
    _check_coils(x.shape, s)
    return T.cmul(T.stack([x] * s.shape[0]), s)


def combine_coils(imgs: Tensor, s) -> Tensor:
    """``sum_i conj(S_i) * img_i``."""
    s = _const(s, imgs)
    if imgs.shape != s.shape:
        raise ShapeError(f"coil images {imgs.shape} vs sensitivities {s.shape}")
    return T.cmul(T.conj(s), imgs).sum(axis=0)


def apply_mask(y: Tensor, m: SamplingMask) -> Tensor:
    return T.mask_mul(y, m.expand(y.shape, y.dtype))


def apply_forward(x: Tensor, s, m: SamplingMask | None = None) -> Tensor:
    """Undersampled multi-coil k-space ``M * F(S_i * x)``."""
    k = T.fft2c(expand_coils(x, s))
    return k if m is None else apply_mask(k, m)


def coil_combine(y: Tensor, s) -> Tensor:
    s = _const(s, y)
    _check_coils(y.shape, s)
    if y.shape != s.shape:
        raise ShapeError(f"k-space {y.shape} vs sensitivities {s.shape}")
    return combine_coils(T.ifft2c(y), s)


def zero_filled(y: Tensor, s, m: SamplingMask | None = None) -> Tensor:
    """Coil-combined image of k-space with unsampled entries set to zero."""
    return coil_combine(y if m is None else apply_mask(y, m), s)


def replace_sampled(k: Tensor, y_meas, m: SamplingMask) -> Tensor:
    """Hard data consistency in k-space: measured values wherever ``m == 1``."""
    y_meas = _const(y_meas, k)
    if y_meas.shape != k.shape:
        raise ShapeError(f"measured k-space {y_meas.shape} vs predicted {k.shape}")
    mask = m.expand(k.shape, k.dtype)
    kept = T.mask_mul(k, 1.0 - mask)
    return kept + Tensor(y_meas.data * mask)


def data_consistency(x_pred: Tensor, y_meas, s, m: SamplingMask) -> Tensor:
    """Re-project an image estimate, overwrite sampled k-space, combine coils."""
    k = T.fft2c(expand_coils(x_pred, s))
    return coil_combine(replace_sampled(k, y_meas, m), s)


# ---------------------------------------------------------------------------
# synthetic data


def _smooth_phase(rng: np.random.Generator, yy: np.ndarray, xx: np.ndarray, amp: float) -> np.ndarray:
    c = rng.uniform(-1.0, 1.0, size=5) * amp
    return c[0] + c[1] * xx + c[2] * yy + c[3] * xx * yy + c[4] * (xx**2 - yy**2)


def _grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.meshgrid(np.linspace(-1, 1, h), np.linspace(-1, 1, w), indexing="ij")
    return yy, xx


def make_phantom(h: int, w: int, seed: int = 0) -> np.ndarray:
    """Piecewise-constant ellipse/rectangle phantom with smooth phase, ``[2, H, W]``.

    Magnitude is peak-normalized to 1.
    """
    if h < 8 or w < 8:
        raise ConfigError(f"phantom must be at least 8x8, got {h}x{w}")
    rng = np.random.default_rng(seed)
    yy, xx = _grid(h, w)
    mag = np.zeros((h, w))

    def ellipse(cy, cx, ay, ax, theta):
        ct, st = np.cos(theta), np.sin(theta)
        u = (xx - cx) * ct + (yy - cy) * st
        v = -(xx - cx) * st + (yy - cy) * ct
        return (u / ax) ** 2 + (v / ay) ** 2 <= 1.0

    # body outline then interior structures
    mag[ellipse(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                rng.uniform(0.75, 0.9), rng.uniform(0.6, 0.85), rng.uniform(-0.3, 0.3))] = rng.uniform(0.5, 0.7)
    for _ in range(rng.integers(4, 9)):
        region = ellipse(rng.uniform(-0.5, 0.5), rng.uniform(-0.45, 0.45),
                         rng.uniform(0.05, 0.35), rng.uniform(0.05, 0.35), rng.uniform(0, np.pi))
        mag[region] += rng.uniform(-0.3, 0.4)
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(-0.4, 0.4, size=2)
        hy, hx = rng.uniform(0.03, 0.2, size=2)
        mag[(np.abs(yy - cy) <= hy) & (np.abs(xx - cx) <= hx)] += rng.uniform(-0.2, 0.3)
    mag = np.clip(mag, 0.0, None)
    peak = mag.max()
    mag = mag / peak if peak > 0 else mag
    phase = _smooth_phase(rng, yy, xx, amp=0.8)
    return np.stack([mag * np.cos(phase), mag * np.sin(phase)])


def make_coils(n_c: int, h: int, w: int, seed: int = 0) -> np.ndarray:
    """Gaussian-profile coil maps with smooth phase, normalized so sum |S_i|^2 = 1."""
    if n_c < 1:
        raise ConfigError(f"need at least one coil, got {n_c}")
    rng = np.random.default_rng(seed)
    yy, xx = _grid(h, w)
    offset = rng.uniform(0, 2 * np.pi)
    maps = np.empty((n_c, h, w), dtype=np.complex128)
    for i in range(n_c):
        ang = offset + 2 * np.pi * i / n_c + rng.normal(0, 0.15)
        rad = rng.uniform(0.9, 1.3)
        cy, cx = rad * np.sin(ang), rad * np.cos(ang)
        sigma = rng.uniform(0.6, 1.0)
        mag = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
        maps[i] = mag * np.exp(1j * _smooth_phase(rng, yy, xx, amp=1.0))
    maps /= np.sqrt((np.abs(maps) ** 2).sum(axis=0, keepdims=True))
    return np.stack([maps.real, maps.imag], axis=1)
