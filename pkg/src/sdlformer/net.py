"""SDLFormer: k-space CNN, sparse and dense locality-enhanced window
transformer blocks, and terminal data consistency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mri
from . import tensor as T
from .config import ModelConfig
from .errors import ContractError, ShapeError
from .module import Module, trunc_normal
from .tensor import Param, Tensor

DENSE = "dense"
SPARSE = "sparse"


# ---------------------------------------------------------------------------
# window layouts


def _check_layout(h: int, w: int, m: int, mode: str) -> None:
    if mode not in (DENSE, SPARSE):
        raise ContractError(f"unknown window mode {mode!r}")
    if h % m or w % m:
        raise ContractError(f"feature map {h}x{w} is not divisible by window {m}; pad first")


def window_partition(x: Tensor, m: int, mode: str) -> Tensor:
    """``[C, H, W]`` -> ``[nWin, M*M, C]``.

    Dense windows are contiguous ``M x M`` tiles. Sparse window ``(a, b)``
    collects pixels ``(a + i*H/M, b + j*W/M)``, spreading over the whole map.
    Windows are numbered row-major over ``(a, b)``; slots row-major over ``(i, j)``.
    """
    c, h, w = x.shape
    _check_layout(h, w, m, mode)
    if mode == DENSE:
        t = x.reshape(c, h // m, m, w // m, m).transpose(1, 3, 2, 4, 0)
    else:
        t = x.reshape(c, m, h // m, m, w // m).transpose(2, 4, 1, 3, 0)
    return t.reshape(-1, m * m, c)


def window_merge(xw: Tensor, h: int, w: int, m: int, mode: str) -> Tensor:
    """Inverse of :func:`window_partition`."""
    _check_layout(h, w, m, mode)
    c = xw.shape[-1]
    if mode == DENSE:
        return xw.reshape(h // m, w // m, m, m, c).transpose(4, 0, 2, 1, 3).reshape(c, h, w)
    return xw.reshape(h // m, w // m, m, m, c).transpose(4, 2, 0, 3, 1).reshape(c, h, w)


@dataclass(frozen=True)
class WindowLayout:
    mode: str
    index: np.ndarray  # [nWin, M*M, 2] -> (row, col)

    @classmethod
    def build(cls, h: int, w: int, m: int, mode: str) -> "WindowLayout":
        rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
        coords = Tensor(np.stack([rows, cols]).astype(np.float64))
        idx = window_partition(coords, m, mode).data.astype(np.int64)
        return cls(mode, idx)


def relative_position_index(m: int) -> np.ndarray:
    """``[M*M, M*M]`` index into a ``(2M-1)^2`` bias table by token offset."""
    yy, xx = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    coords = np.stack([yy.ravel(), xx.ravel()])
    rel = coords[:, :, None] - coords[:, None, :] + (m - 1)
    return rel[0] * (2 * m - 1) + rel[1]


# ---------------------------------------------------------------------------
# layers


def _conv_init(rng, c_out, c_in_g, k, dtype):
    bound = 1.0 / np.sqrt(c_in_g * k * k)
    return rng.uniform(-bound, bound, size=(c_out, c_in_g, k, k)).astype(dtype)


class LeWMSA(Module):
    """Window multi-head self-attention with relative position bias and LCM."""

    def __init__(self, dim: int, heads: int, window: int, locality: bool,
                 rng: np.random.Generator, dtype=np.float32):
        self.dim, self.heads, self.window, self.locality = dim, heads, window, locality
        self.qkv_w = Param(trunc_normal(rng, (dim, 3 * dim), dtype=dtype))
        self.qkv_b = Param(np.zeros(3 * dim, dtype=dtype))
        self.rel_bias = Param(np.zeros(((2 * window - 1) ** 2, heads), dtype=dtype))
        if locality:
            self.lcm_w = Param(_conv_init(rng, dim, 1, 3, dtype))
            self.lcm_b = Param(np.zeros(dim, dtype=dtype))
        self.proj_w = Param(np.zeros((dim, dim), dtype=dtype))
        self.proj_b = Param(np.zeros(dim, dtype=dtype))
        self._rel_index = relative_position_index(window).reshape(-1)

    def forward(self, xw: Tensor) -> Tensor:
        n_win, n_tok, c = xw.shape
        m, heads = self.window, self.heads
        if c != self.dim or n_tok != m * m:
            raise ShapeError(f"LeWMSA expects [nWin, {m * m}, {self.dim}], got {xw.shape}")
        d = c // heads
        qkv = T.linear(xw.reshape(n_win * n_tok, c), self.qkv_w, self.qkv_b)
        qkv = qkv.reshape(n_win, n_tok, 3, heads, d).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0] * (d ** -0.5), qkv[1], qkv[2]
        logits = T.matmul(q, k.transpose(0, 1, 3, 2))
        bias = self.rel_bias[self._rel_index].reshape(n_tok, n_tok, heads).transpose(2, 0, 1)
        attn = T.softmax(T.add_bias(logits, bias), axis=-1)
        out = T.matmul(attn, v).transpose(0, 2, 1, 3).reshape(n_win, n_tok, c)
        if self.locality:
            vs = v.transpose(0, 1, 3, 2).reshape(n_win, c, m, m)
            lcm = T.conv2d(vs, self.lcm_w, self.lcm_b, groups=c)
            out = out + lcm.reshape(n_win, c, n_tok).transpose(0, 2, 1)
        out = T.linear(out.reshape(n_win * n_tok, c), self.proj_w, self.proj_b)
        return out.reshape(n_win, n_tok, c)


class LeFF(Module):
    """Feed-forward with a depth-wise 3x3 convolution on re-spatialized tokens."""

    def __init__(self, dim: int, ratio: int, locality: bool, rng: np.random.Generator, dtype=np.float32):
        hidden = dim * ratio
        self.dim, self.hidden, self.locality = dim, hidden, locality
        self.fc1_w = Param(trunc_normal(rng, (dim, hidden), dtype=dtype))
        self.fc1_b = Param(np.zeros(hidden, dtype=dtype))
        if locality:
            self.dw_w = Param(_conv_init(rng, hidden, 1, 3, dtype))
            self.dw_b = Param(np.zeros(hidden, dtype=dtype))
        self.fc2_w = Param(np.zeros((hidden, dim), dtype=dtype))
        self.fc2_b = Param(np.zeros(dim, dtype=dtype))

    def forward(self, x: Tensor, h: int, w: int) -> Tensor:
        """``x`` is ``[H*W, C]`` in row-major image order."""
        if x.ndim != 2 or x.shape[0] != h * w:
            raise ContractError(f"LeFF got {x.shape} tokens for a {h}x{w} map")
        hid = T.gelu(T.linear(x, self.fc1_w, self.fc1_b))
        if self.locality:
            s = hid.transpose(1, 0).reshape(self.hidden, h, w)
            s = T.conv2d(s, self.dw_w, self.dw_b, groups=self.hidden)
            hid = s.reshape(self.hidden, h * w).transpose(1, 0)
        hid = T.gelu(hid)
        return T.linear(hid, self.fc2_w, self.fc2_b)


class LETBlock(Module):
    """Locality enhanced transformer block (sparse or dense windows).

    ``X' = LeWMSA(LN(X)) + X``; ``X_out = LeFF(LN(X')) + X'``. With
    ``pre_attn_norm=False`` the first LayerNorm is dropped.
    """

    def __init__(self, cfg: ModelConfig, mode: str, rng: np.random.Generator, dtype=np.float32):
        c = cfg.embed_dim
        self.mode, self.window, self.eps = mode, cfg.window, cfg.ln_eps
        if cfg.pre_attn_norm:
            self.norm1_g = Param(np.ones(c, dtype=dtype))
            self.norm1_b = Param(np.zeros(c, dtype=dtype))
        self.msa = LeWMSA(c, cfg.n_heads, cfg.window, cfg.enable_locality, rng, dtype)
        self.norm2_g = Param(np.ones(c, dtype=dtype))
        self.norm2_b = Param(np.zeros(c, dtype=dtype))
        self.leff = LeFF(c, cfg.leff_ratio, cfg.enable_locality, rng, dtype)
        self._pre_norm = cfg.pre_attn_norm

    def forward(self, x: Tensor) -> Tensor:
        c, h, w = x.shape
        tok = x.reshape(c, h * w).transpose(1, 0)
        a = T.layer_norm(tok, self.norm1_g, self.norm1_b, self.eps) if self._pre_norm else tok
        aw = window_partition(a.transpose(1, 0).reshape(c, h, w), self.window, self.mode)
        attn = window_merge(self.msa(aw), h, w, self.window, self.mode)
        x1 = x + attn
        tok1 = x1.reshape(c, h * w).transpose(1, 0)
        f = self.leff(T.layer_norm(tok1, self.norm2_g, self.norm2_b, self.eps), h, w)
        return (tok1 + f).transpose(1, 0).reshape(c, h, w)


class KSpaceCNN(Module):
    """Residual conv stack over the coil-stacked real/imag k-space channels."""

    def __init__(self, n_coils: int, cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32):
        chans = [2 * n_coils] + [cfg.kcnn_channels] * (cfg.kcnn_layers - 1) + [2 * n_coils]
        self.n_coils = n_coils
        self.convs_w, self.convs_b, self.norms_g, self.norms_b = [], [], [], []
        for i, (ci, co) in enumerate(zip(chans[:-1], chans[1:])):
            last = i == len(chans) - 2
            w = np.zeros((co, ci, 3, 3), dtype=dtype) if last else _conv_init(rng, co, ci, 3, dtype)
            self.convs_w.append(Param(w))
            self.convs_b.append(Param(np.zeros(co, dtype=dtype)))
            if not last:
                self.norms_g.append(Param(np.ones(co, dtype=dtype)))
                self.norms_b.append(Param(np.zeros(co, dtype=dtype)))

    def forward(self, y: Tensor) -> Tensor:
        nc, two, h, w = y.shape
        if nc != self.n_coils:
            raise ShapeError(f"k-space CNN built for {self.n_coils} coils, got {nc}")
        z = y.reshape(2 * nc, h, w)
        out = z
        n = len(self.convs_w)
        for i in range(n):
            out = T.conv2d(out, self.convs_w[i], self.convs_b[i])
            if i < n - 1:
                out = T.relu(T.instance_norm(out, self.norms_g[i], self.norms_b[i]))
        return (z + out).reshape(nc, two, h, w)


class SDLFormer(Module):
    """k-space CNN -> DC -> coil combine -> embed -> SAB x n -> DAB x n -> conv,
    global residual, terminal data consistency."""

    def __init__(self, cfg: ModelConfig, n_coils: int, seed: int = 0, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.cfg, self.n_coils = cfg, n_coils
        self.dtype = np.dtype(dtype)
        c = cfg.embed_dim
        self.kcnn = KSpaceCNN(n_coils, cfg, rng, dtype)
        self.sab = [LETBlock(cfg, SPARSE, rng, dtype) for _ in range(cfg.n_sab)] if cfg.enable_sab else []
        self.dab = [LETBlock(cfg, DENSE, rng, dtype) for _ in range(cfg.n_dab)] if cfg.enable_dab else []
        if self.sab or self.dab:
            self.embed_w = Param(_conv_init(rng, c, 2, 3, dtype))
            self.embed_b = Param(np.zeros(c, dtype=dtype))
            self.out_w = Param(np.zeros((2, c, 3, 3), dtype=dtype))
            self.out_b = Param(np.zeros(2, dtype=dtype))
        self.named_params()
        self.trace: list[tuple[str, Tensor]] = []

    def image_branch(self, x0: Tensor) -> Tensor:
        """Transformer refinement of a coil-combined image, with global residual."""
        if not (self.sab or self.dab):
            return x0
        m = self.cfg.window
        _, h, w = x0.shape
        xp = T.pad_reflect(x0, (-h) % m, (-w) % m)
        f = T.conv2d(xp, self.embed_w, self.embed_b)
        self.trace.append(("embed", f))
        for i, blk in enumerate(self.sab):
            f = blk(f)
            self.trace.append((f"sab.{i}", f))
        for i, blk in enumerate(self.dab):
            f = blk(f)
            self.trace.append((f"dab.{i}", f))
        r = T.conv2d(f, self.out_w, self.out_b)
        if r.shape[1:] != (h, w):
            r = r[:, :h, :w]
        return x0 + r

    def forward(self, y1: Tensor, s, m1: mri.SamplingMask) -> Tensor:
        if not isinstance(y1, Tensor):
            y1 = Tensor(y1, dtype=self.dtype)
        self.trace = []
        k = self.kcnn(y1)
        self.trace.append(("kspace_cnn", k))
        k = mri.replace_sampled(k, y1, m1)
        x0 = mri.coil_combine(k, s)
        self.trace.append(("coil_combine", x0))
        x = self.image_branch(x0)
        self.trace.append(("image_branch", x))
        out = mri.data_consistency(x, y1, s, m1)
        self.trace.append(("data_consistency", out))
        return out

    def first_nonfinite(self) -> str | None:
        """Name of the first stage of the last forward pass holding NaN/inf."""
        for name, t in self.trace:
            if not np.isfinite(t.data).all():
                return name
        return None
