"""Dense tensors with reverse-mode differentiation.

Values live in numpy arrays. Every differentiable op builds a node holding its
parents and a closure mapping the output gradient to one gradient per parent;
``Tensor.backward`` walks the graph in reverse topological order.

Shapes are explicit: apart from bias addition there is no broadcasting.
Complex fields are stored as real tensors with a (real, imag) axis at
position -3, i.e. ``[..., 2, H, W]``.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels as _k
from .errors import ConfigError, ContractError, ShapeError

_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def _as_float_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return np.ascontiguousarray(arr, dtype=dtype)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """An n-dimensional real array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_float_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every tracked leaf."""
        if self.data.size != 1:
            raise ContractError(f"backward needs a scalar output, got shape {self.shape}")
        if not self.requires_grad:
            raise ContractError("backward called on a tensor that does not require grad")

        order = _topological(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = np.array(g) if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = grads[key] + pg if key in grads else pg

    # operator sugar; all shape rules of the named ops apply
    def __add__(self, other):
        return add(self, _lift(other, self))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other, self))

    def __rsub__(self, other):
        return sub(_lift(other, self), self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self):
        return mean(self)


class Param(Tensor):
    """A learnable leaf tensor with a unique dotted name inside its model."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = "", dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.name = name

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.shape}, dtype={self.dtype})"


def _lift(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.full(like.shape, value, dtype=like.dtype))


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _make(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    track = grad_enabled() and any(p.requires_grad for p in parents)
    out.requires_grad = track
    out._parents = tuple(parents) if track else ()
    out._backward = backward if track else None
    return out


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# elementwise and structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "add")
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "sub")
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(x: Tensor, c: float) -> Tensor:
    return _make(x.data * x.data.dtype.type(c), (x,), lambda g: (g * c,))


def mask_mul(x: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a constant array of the same shape (masks, windows)."""
    mask = np.asarray(mask, dtype=x.dtype)
    if mask.shape != x.shape:
        raise ShapeError(f"mask_mul: mask shape {mask.shape} vs tensor {x.shape}")
    return _make(x.data * mask, (x,), lambda g: (g * mask,))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """``x + b`` with ``b`` matching the trailing dimensions of ``x``."""
    if x.shape[x.ndim - b.ndim:] != b.shape:
        raise ShapeError(f"add_bias: bias {b.shape} does not match trailing dims of {x.shape}")
    lead = tuple(range(x.ndim - b.ndim))
    return _make(x.data + b.data, (x, b), lambda g: (g, g.sum(axis=lead) if lead else g))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    src = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {src} as {tuple(shape)}") from exc
    return _make(out, (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _make(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),))


def _is_basic(idx) -> bool:
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(p, (int, slice, type(Ellipsis))) or p is None for p in parts)


def getitem(x: Tensor, idx) -> Tensor:
    basic = _is_basic(idx)
    src_shape, dtype = x.shape, x.dtype

    def backward(g):
        full = np.zeros(src_shape, dtype=dtype)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _make(x.data[idx], (x,), backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError(f"stack: mixed shapes {sorted(shapes)}")
    out = np.stack([t.data for t in tensors], axis=axis)
    n = len(tensors)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return _make(out, tuple(tensors), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tuple(tensors), backward)


def tsum(x: Tensor, axis=None) -> Tensor:
    src = x.shape
    out = np.asarray(x.data.sum(axis=axis))

    def backward(g):
        if axis is None:
            return (np.full(src, g, dtype=x.dtype),)
        return (np.broadcast_to(np.expand_dims(g, axis), src).copy(),)

    return _make(out, (x,), backward)


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    src = x.shape
    return _make(np.asarray(x.data.mean()), (x,), lambda g: (np.full(src, g / n, dtype=x.dtype),))


def pad_reflect(x: Tensor, pad_h: int, pad_w: int) -> Tensor:
    """Reflect-pad the last two axes at the bottom/right edge."""
    if pad_h == 0 and pad_w == 0:
        return x
    h, w = x.shape[-2:]
    rows = np.pad(np.arange(h), (0, pad_h), mode="reflect")
    cols = np.pad(np.arange(w), (0, pad_w), mode="reflect")
    out = x.data[..., rows[:, None], cols[None, :]]

    def backward(g):
        full = np.zeros(x.shape, dtype=x.dtype)
        lead = x.shape[:-2]
        flat = full.reshape(-1, h * w)
        target = (rows[:, None] * w + cols[None, :]).reshape(-1)
        gf = g.reshape(-1, target.size)
        for k in range(flat.shape[0]):
            flat[k] += np.bincount(target, weights=gf[k], minlength=h * w)
        return (flat.reshape(*lead, h, w),)

    return _make(out, (x,), backward)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched ``a @ b`` over identical leading dimensions."""
    if a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        return (g @ np.swapaxes(bd, -1, -2), np.swapaxes(ad, -1, -2) @ g)

    return _make(ad @ bd, (a, b), backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` for ``x[N, Din]``, ``w[Din, Dout]``, ``b[Dout]``."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"linear: bias {b.shape} incompatible with weight {w.shape}")
    xd, wd = x.data, w.data
    out = xd @ wd
    if b is not None:
        out += b.data

    def backward(g):
        gb = g.sum(axis=0) if b is not None else None
        return (g @ wd.T, xd.T @ g, gb)

    parents = (x, w, b) if b is not None else (x, w)
    return _make(out, parents, backward)


# ---------------------------------------------------------------------------
# convolution


def conv2d(x: Tensor, k: Tensor, b: Tensor | None = None, stride: int = 1,
           pad: int | None = None, groups: int = 1) -> Tensor:
    """Zero-padded 2-D cross-correlation.

    ``x`` is ``[C_in, H, W]`` or batched ``[B, C_in, H, W]``; ``k`` is
    ``[C_out, C_in // groups, kh, kw]``. ``pad`` defaults to ``(kh - 1) // 2``.
    """
    batched = x.ndim == 4
    if x.ndim not in (3, 4) or k.ndim != 4:
        raise ShapeError(f"conv2d: input {x.shape} / kernel {k.shape} have wrong rank")
    c_in = x.shape[-3]
    c_out, cg, kh, kw = k.shape
    if groups < 1 or c_in % groups or c_out % groups:
        raise ConfigError(f"conv2d: groups={groups} must divide C_in={c_in} and C_out={c_out}")
    if cg != c_in // groups:
        raise ShapeError(f"conv2d: kernel {k.shape} expects {cg * groups} input channels, got {c_in}")
    if b is not None and b.shape != (c_out,):
        raise ShapeError(f"conv2d: bias {b.shape} vs {c_out} output channels")
    if stride < 1:
        raise ConfigError(f"conv2d: stride must be >= 1, got {stride}")
    if pad is None:
        pad = (kh - 1) // 2
    xd = x.data if batched else x.data[None]
    bsz, _, h, w = xd.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input {h}x{w}")
    kd = k.data

    if cg == 1 and c_out == c_in and stride == 1:
        out, grads = _depthwise(xd, kd, pad, ho, wo)
    else:
        out, grads = _grouped(xd, kd, pad, stride, groups, ho, wo)
    if b is not None:
        out += b.data[:, None, None]

    def backward(g):
        g = np.ascontiguousarray(g if batched else g[None])
        gx, gk = grads(g)
        gb = g.sum(axis=(0, 2, 3)) if b is not None else None
        return (gx if batched else gx[0], gk, gb)

    out = out if batched else out[0]
    parents = (x, k, b) if b is not None else (x, k)
    return _make(out, parents, backward)


def _depthwise(xd, kd, pad, ho, wo):
    bsz, c, h, w = xd.shape
    kh, kw = kd.shape[2:]
    planes = bsz * c
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad))).reshape(planes, -1)
    kp = np.ascontiguousarray(np.broadcast_to(kd[:, 0], (bsz, c, kh, kw))).reshape(planes, kh, kw)
    out = _k.dw_forward(xp, kp, ho, wo).reshape(bsz, c, ho, wo)

    def grads(g):
        g = np.ascontiguousarray(g, dtype=xd.dtype).reshape(planes, ho, wo)
        gxp, gk = _k.dw_backward(xp, kp, g)
        gx = gxp.reshape(bsz, c, h + 2 * pad, w + 2 * pad)[..., pad:pad + h, pad:pad + w]
        return np.ascontiguousarray(gx), gk.reshape(bsz, c, kh, kw).sum(axis=0)[:, None]

    return out, grads


def _grouped(xd, kd, pad, stride, groups, ho, wo):
    bsz, c_in, h, w = xd.shape
    c_out, cg, kh, kw = kd.shape
    xp = np.pad(xd, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else xd
    taps = [
        (Ellipsis, slice(di, di + stride * (ho - 1) + 1, stride),
         slice(dj, dj + stride * (wo - 1) + 1, stride))
        for di in range(kh) for dj in range(kw)
    ]
    cols = np.stack([xp[sl] for sl in taps], axis=2)  # [B, C_in, K, ho, wo]
    cols = cols.reshape(bsz, groups, cg * kh * kw, ho * wo)
    wmat = kd.reshape(groups, c_out // groups, cg * kh * kw)
    out = np.matmul(wmat, cols).reshape(bsz, c_out, ho, wo)

    def grads(g):
        gm = g.reshape(bsz, groups, c_out // groups, ho * wo)
        gk = np.matmul(gm, np.swapaxes(cols, -1, -2)).sum(axis=0)
        gcols = np.matmul(np.swapaxes(wmat, -1, -2), gm).reshape(bsz, c_in, kh * kw, ho, wo)
        gxp = np.zeros_like(xp)
        for t, sl in enumerate(taps):
            gxp[sl] += gcols[:, :, t]
        gx = gxp[..., pad:pad + h, pad:pad + w] if pad else gxp
        return np.ascontiguousarray(gx), gk.reshape(kd.shape)

    return out, grads


# ---------------------------------------------------------------------------
# normalization


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize each row over the last axis, then scale and shift."""
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"layer_norm: affine params {gamma.shape}/{beta.shape} vs {c} features")
    xd = np.ascontiguousarray(x.data).reshape(-1, c)
    out, xhat = np.empty_like(xd), np.empty_like(xd)
    inv = np.empty(xd.shape[0], dtype=xd.dtype)
    gam, bet = gamma.data.astype(xd.dtype), beta.data.astype(xd.dtype)
    _k.layer_norm_fwd(xd, gam, bet, eps, out, xhat, inv)

    def backward(g):
        g = np.ascontiguousarray(g, dtype=xd.dtype).reshape(xd.shape)
        gx = np.empty_like(xd)
        gg, gb = np.zeros(c, dtype=xd.dtype), np.zeros(c, dtype=xd.dtype)
        _k.layer_norm_bwd(g, gam, xhat, inv, gx, gg, gb)
        return (gx.reshape(x.shape), gg, gb)

    return _make(out.reshape(x.shape), (x, gamma, beta), backward)


def instance_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardize each channel of ``[C, H, W]`` (or ``[B, C, H, W]``) over space."""
    c = x.shape[-3]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"instance_norm: affine params {gamma.shape}/{beta.shape} vs {c} channels")
    return _normalize(x, gamma, beta, eps, axes=(-2, -1), affine_shape=(c, 1, 1))


def _normalize(x, gamma, beta, eps, axes, affine_shape):
    xd = x.data
    mu = xd.mean(axis=axes, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gam = gamma.data.reshape(affine_shape)
    out = xhat * gam + beta.data.reshape(affine_shape)
    feat_axis = xd.ndim - len(affine_shape)
    param_axes = tuple(i for i in range(xd.ndim) if i != feat_axis)

    def backward(g):
        gh = g * gam
        gx = inv * (gh - gh.mean(axis=axes, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=axes, keepdims=True))
        ggamma = (g * xhat).sum(axis=param_axes).reshape(gamma.shape)
        gbeta = g.sum(axis=param_axes).reshape(beta.shape)
        return (gx, ggamma, gbeta)

    return _make(out, (x, gamma, beta), backward)


# ---------------------------------------------------------------------------
# activations


def relu(x: Tensor) -> Tensor:
    xd = x.data
    return _make(np.maximum(xd, 0), (x,), lambda g: (g * (xd > 0),))


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh form: ``0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))``."""
    xd = np.ascontiguousarray(x.data)
    t = np.empty_like(xd)
    _k.gelu_inner(xd, t)
    np.tanh(t, out=t)
    out = np.empty_like(xd)
    _k.gelu_outer(xd, t, out)

    def backward(g):
        gx = np.empty_like(xd)
        _k.gelu_grad(xd, t, np.ascontiguousarray(g, dtype=xd.dtype), gx)
        return (gx,)

    return _make(out, (x,), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Softmax with max-subtraction."""
    axis = axis % x.ndim
    xd = np.ascontiguousarray(np.moveaxis(x.data, axis, -1))
    rows = xd.reshape(-1, xd.shape[-1])
    s = np.empty_like(rows)
    _k.row_shift_max(rows, s)
    np.exp(s, out=s)
    _k.row_normalize(s)

    def backward(g):
        gr = np.ascontiguousarray(np.moveaxis(g, axis, -1), dtype=s.dtype).reshape(s.shape)
        out = np.empty_like(s)
        _k.softmax_grad(s, gr, out)
        return (np.moveaxis(out.reshape(xd.shape), -1, axis),)

    return _make(np.moveaxis(s.reshape(xd.shape), -1, axis), (x,), backward)


# ---------------------------------------------------------------------------
# complex helpers and Fourier transforms (complex axis at -3)


def to_complex(a: np.ndarray) -> np.ndarray:
    cdt = np.complex64 if a.dtype == np.float32 else np.complex128
    out = np.empty(a.shape[:-3] + a.shape[-2:], dtype=cdt)
    out.real = a[..., 0, :, :]
    out.imag = a[..., 1, :, :]
    return out


def from_complex(c: np.ndarray, dtype) -> np.ndarray:
    return np.stack([c.real, c.imag], axis=-3).astype(dtype, copy=False)


def _check_complex(x: Tensor, op: str) -> None:
    if x.ndim < 3 or x.shape[-3] != 2:
        raise ShapeError(f"{op}: expected [..., 2, H, W], got {x.shape}")


def _fft2c(c: np.ndarray) -> np.ndarray:
    ax = (-2, -1)
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(c, axes=ax), norm="ortho"), axes=ax)


def _ifft2c(c: np.ndarray) -> np.ndarray:
    ax = (-2, -1)
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(c, axes=ax), norm="ortho"), axes=ax)


def fft2c(x: Tensor) -> Tensor:
    """Centered, orthonormal 2-D DFT over the last two axes."""
    _check_complex(x, "fft2c")
    dt = x.dtype
    out = from_complex(_fft2c(to_complex(x.data)), dt)
    return _make(out, (x,), lambda g: (from_complex(_ifft2c(to_complex(g)), dt),))


def ifft2c(y: Tensor) -> Tensor:
    """Inverse of :func:`fft2c` (and its adjoint)."""
    _check_complex(y, "ifft2c")
    dt = y.dtype
    out = from_complex(_ifft2c(to_complex(y.data)), dt)
    return _make(out, (y,), lambda g: (from_complex(_fft2c(to_complex(g)), dt),))


def cmul(a: Tensor, b: Tensor) -> Tensor:
    """Pointwise complex product of two same-shape complex tensors."""
    _check_same(a, b, "cmul")
    _check_complex(a, "cmul")
    dt = a.dtype
    ac, bc = to_complex(a.data), to_complex(b.data)

    def backward(g):
        gc = to_complex(g)
        return (from_complex(gc * bc.conj(), dt), from_complex(gc * ac.conj(), dt))

    return _make(from_complex(ac * bc, dt), (a, b), backward)


def conj(a: Tensor) -> Tensor:
    _check_complex(a, "conj")
    sign = np.ones(a.shape[-3:], dtype=a.dtype)
    sign[1] = -1
    sign = np.broadcast_to(sign, a.shape)
    return _make(a.data * sign, (a,), lambda g: (g * sign,))


# ---------------------------------------------------------------------------
# losses


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference; the subgradient at a tie is 0."""
    _check_same(a, b, "l1_loss")
    d = a.data - b.data
    n = d.size
    out = np.asarray(np.abs(d).mean(), dtype=d.dtype)

    def backward(g):
        s = np.sign(d) * (g / n)
        return (s, -s)

    return _make(out, (a, b), backward)


def all_finite(tensors: Iterable[Tensor]) -> bool:
    return all(np.isfinite(t.data).all() for t in tensors)
