"""Parameter containers: a tiny module tree with dotted parameter names."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .errors import FormatError
from .tensor import Param


class Module:
    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def _children(self) -> Iterator[tuple[str, object]]:
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            if isinstance(value, (Param, Module)):
                yield key, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, (Param, Module)):
                        yield f"{key}.{i}", item

    def named_params(self, prefix: str = "") -> dict[str, Param]:
        """All parameters keyed by dotted path; also refreshes ``Param.name``."""
        out: dict[str, Param] = {}
        for key, value in self._children():
            name = f"{prefix}{key}"
            if isinstance(value, Param):
                value.name = name
                out[name] = value
            else:
                out.update(value.named_params(name + "."))
        return out

    def params(self) -> list[Param]:
        return list(self.named_params().values())

    def param_count(self) -> int:
        return sum(p.data.size for p in self.params())

    def zero_grad(self) -> None:
        for p in self.params():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_params().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.named_params()
        unknown = sorted(set(state) - set(own))
        missing = sorted(set(own) - set(state))
        if unknown:
            raise FormatError(f"unknown parameter names in state: {unknown[:5]}")
        if missing:
            raise FormatError(f"state is missing parameters: {missing[:5]}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise FormatError(f"parameter {name}: stored shape {arr.shape} vs model {p.shape}")
            p.data = np.array(arr, dtype=p.dtype)


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02, dtype=np.float32) -> np.ndarray:
    """Normal samples truncated to +-2 std by redrawing."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out.astype(dtype)
