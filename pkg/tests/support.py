"""Shared test helpers: finite-difference gradient checks and tiny datasets."""

import numpy as np

from sdlformer import tensor as T
from sdlformer.tensor import Tensor

FD_H = 1e-5
FD_TOL = 1e-4


def _scalarize(out: Tensor, weights: np.ndarray) -> Tensor:
    if out.ndim == 0:
        return out
    return T.tsum(T.mul(out, Tensor(weights)))


def grad_check(fn, arrays, seed=0, h=FD_H, max_entries=None):
    """Worst relative error between backprop and central differences.

    ``fn`` maps tensors to a tensor; a fixed random projection turns it into a
    scalar. ``max_entries`` samples that many coordinates per input.
    """
    rng = np.random.default_rng(seed)
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = fn(*tensors)
    weights = rng.normal(size=out.shape)
    _scalarize(out, weights).backward()

    def value(arrs):
        with T.no_grad():
            return _scalarize(fn(*[Tensor(a) for a in arrs]), weights).item()

    worst = 0.0
    for k, (a, t) in enumerate(zip(arrays, tensors)):
        analytic = np.zeros_like(a) if t.grad is None else t.grad
        idx = np.arange(a.size)
        if max_entries is not None and a.size > max_entries:
            idx = rng.choice(a.size, size=max_entries, replace=False)
        num = np.empty(idx.size)
        for n, flat in enumerate(idx):
            plus = [x.copy() for x in arrays]
            minus = [x.copy() for x in arrays]
            plus[k].flat[flat] += h
            minus[k].flat[flat] -= h
            num[n] = (value(plus) - value(minus)) / (2 * h)
        ana = analytic.reshape(-1)[idx]
        scale = max(np.linalg.norm(ana), np.linalg.norm(num), 1e-12)
        worst = max(worst, float(np.linalg.norm(ana - num) / scale))
    return worst
