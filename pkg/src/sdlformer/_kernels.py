"""Compiled inner loops for depth-wise convolution (stride 1, zero padding).

Each plane is zero-padded to ``[Hp, Wp]`` and flattened. Output row ``i``
column ``j`` lives at flat index ``i * Wp + j``, so every kernel tap becomes
one contiguous shifted axpy; the ``Wp - Wo`` trailing columns of each output
row are scratch and are dropped (forward) or held at zero (backward).
"""

import numpy as np
from numba import njit

_FM = {"reassoc", "contract"}


@njit(cache=True, fastmath=_FM)
def dw_forward(xp, k, ho, wo):
    # xp [P, Hp*Wp] padded planes, k [P, kh, kw] -> out [P, ho, wo]
    n_planes = xp.shape[0]
    kh, kw = k.shape[1], k.shape[2]
    wp = xp.shape[1] // (ho + kh - 1)
    span = (ho - 1) * wp + wo
    out = np.zeros((n_planes, ho, wo), dtype=xp.dtype)
    acc = np.empty(span, dtype=xp.dtype)
    for p in range(n_planes):
        acc[:] = 0
        xr = xp[p]
        for di in range(kh):
            for dj in range(kw):
                kv = k[p, di, dj]
                off = di * wp + dj
                xs = xr[off:off + span]
                for n in range(span):
                    acc[n] += kv * xs[n]
        for i in range(ho):
            for j in range(wo):
                out[p, i, j] = acc[i * wp + j]
    return out


@njit(cache=True, fastmath=_FM)
def dw_backward(xp, k, g):
    # g [P, ho, wo] -> (gxp [P, Hp*Wp], gk [P, kh, kw])
    n_planes = xp.shape[0]
    kh, kw = k.shape[1], k.shape[2]
    ho, wo = g.shape[1], g.shape[2]
    wp = xp.shape[1] // (ho + kh - 1)
    span = (ho - 1) * wp + wo
    gxp = np.zeros_like(xp)
    gk = np.zeros_like(k)
    gflat = np.zeros(span, dtype=xp.dtype)
    for p in range(n_planes):
        for i in range(ho):
            for j in range(wo):
                gflat[i * wp + j] = g[p, i, j]
        xr = xp[p]
        gr = gxp[p]
        for di in range(kh):
            for dj in range(kw):
                kv = k[p, di, dj]
                off = di * wp + dj
                xs = xr[off:off + span]
                gs = gr[off:off + span]
                s = xr[0] * 0
                for n in range(span):
                    s += gflat[n] * xs[n]
                for n in range(span):
                    gs[n] += kv * gflat[n]
                gk[p, di, dj] += s
    return gxp, gk


# ---------------------------------------------------------------------------
# fused elementwise / row-wise helpers; transcendental calls stay in numpy
# (vectorized there), everything around them is a single pass here

_GELU_C = 0.7978845608028654  # sqrt(2 / pi)
_GELU_A = 0.044715


@njit(cache=True, fastmath=_FM)
def gelu_inner(x, u):
    xf, uf = x.ravel(), u.ravel()
    for i in range(xf.size):
        v = xf[i]
        uf[i] = _GELU_C * v * (1.0 + _GELU_A * v * v)


@njit(cache=True, fastmath=_FM)
def gelu_outer(x, t, out):
    xf, tf, of = x.ravel(), t.ravel(), out.ravel()
    for i in range(xf.size):
        of[i] = 0.5 * xf[i] * (1.0 + tf[i])


@njit(cache=True, fastmath=_FM)
def gelu_grad(x, t, g, out):
    xf, tf, gf, of = x.ravel(), t.ravel(), g.ravel(), out.ravel()
    for i in range(xf.size):
        v, th = xf[i], tf[i]
        dt = (1.0 - th * th) * _GELU_C * (1.0 + 3.0 * _GELU_A * v * v)
        of[i] = gf[i] * (0.5 * (1.0 + th) + 0.5 * v * dt)


@njit(cache=True, fastmath=_FM)
def row_shift_max(x, out):
    # x, out [R, n]: out = x - rowmax(x)
    for r in range(x.shape[0]):
        row = x[r]
        m = row[0]
        for j in range(1, row.size):
            if row[j] > m:
                m = row[j]
        o = out[r]
        for j in range(row.size):
            o[j] = row[j] - m


@njit(cache=True, fastmath=_FM)
def row_normalize(e):
    for r in range(e.shape[0]):
        row = e[r]
        s = row[0] * 0
        for j in range(row.size):
            s += row[j]
        inv = 1.0 / s
        for j in range(row.size):
            row[j] *= inv


@njit(cache=True, fastmath=_FM)
def softmax_grad(s, g, out):
    for r in range(s.shape[0]):
        sr, gr, o = s[r], g[r], out[r]
        d = sr[0] * 0
        for j in range(sr.size):
            d += sr[j] * gr[j]
        for j in range(sr.size):
            o[j] = sr[j] * (gr[j] - d)


@njit(cache=True, fastmath=_FM)
def layer_norm_fwd(x, gamma, beta, eps, out, xhat, inv):
    n = x.shape[1]
    for r in range(x.shape[0]):
        row = x[r]
        mu = row[0] * 0
        for j in range(n):
            mu += row[j]
        mu /= n
        var = row[0] * 0
        for j in range(n):
            d = row[j] - mu
            var += d * d
        var /= n
        iv = 1.0 / np.sqrt(var + eps)
        inv[r] = iv
        xh, o = xhat[r], out[r]
        for j in range(n):
            h = (row[j] - mu) * iv
            xh[j] = h
            o[j] = h * gamma[j] + beta[j]


@njit(cache=True, fastmath=_FM)
def layer_norm_bwd(g, gamma, xhat, inv, gx, ggamma, gbeta):
    n = g.shape[1]
    for r in range(g.shape[0]):
        gr, xh, o = g[r], xhat[r], gx[r]
        a = gr[0] * 0
        b = gr[0] * 0
        for j in range(n):
            gh = gr[j] * gamma[j]
            a += gh
            b += gh * xh[j]
            ggamma[j] += gr[j] * xh[j]
            gbeta[j] += gr[j]
        a /= n
        b /= n
        iv = inv[r]
        for j in range(n):
            o[j] = iv * (gr[j] * gamma[j] - a - xh[j] * b)
