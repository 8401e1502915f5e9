"""Synthetic multi-coil datasets: generation and manifest-driven loading."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import mri
from .errors import ConfigError, FormatError
from .io import SliceData, load_slice, save_slice
from .tensor import Tensor

MANIFEST = "manifest.json"


def derive_seed(*parts: int) -> int:
    """Independent 32-bit seed for a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def synth_slice(h: int, w: int, coils: int, seed: int) -> SliceData:
    """Phantom, coil maps and fully sampled k-space for one slice."""
    gt = mri.make_phantom(h, w, seed=derive_seed(seed, 0))
    maps = mri.make_coils(coils, h, w, seed=derive_seed(seed, 1))
    ksp = mri.apply_forward(Tensor(gt), Tensor(maps)).data
    return SliceData(ksp, maps, gt)


def synthesize(out, n: int, h: int, w: int, coils: int, seed: int = 0,
               val_slices: int | None = None) -> Path:
    """Write ``n`` SDLK files plus ``manifest.json``; the last ``val_slices`` are validation."""
    if n < 1:
        raise ConfigError(f"need at least one slice, got {n}")
    if coils < 1:
        raise ConfigError(f"need at least one coil, got {coils}")
    n_val = n // 4 if val_slices is None else val_slices
    if not 0 <= n_val <= n:
        raise ConfigError(f"val_slices must lie in [0, {n}], got {n_val}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        s = derive_seed(seed, i)
        name = f"slice_{i:04d}.sdlk"
        save_slice(out / name, synth_slice(h, w, coils, s))
        entries.append({"file": name, "seed": s, "split": "val" if i >= n - n_val else "train"})
    doc = {"version": 1, "seed": seed, "size": [h, w], "coils": coils, "slices": entries}
    (out / MANIFEST).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return out


@dataclass
class Dataset:
    slices: list[SliceData]
    ids: list[str]
    splits: list[str]

    def __post_init__(self):
        if not self.slices:
            raise FormatError("dataset holds no slices")
        shapes = {sl.shape for sl in self.slices}
        if len(shapes) != 1:
            raise FormatError(f"slices disagree in shape: {sorted(shapes)}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.slices[0].shape

    def indices(self, split: str) -> list[int]:
        return [i for i, s in enumerate(self.splits) if s == split]

    @classmethod
    def load(cls, root) -> "Dataset":
        root = Path(root)
        try:
            doc = json.loads((root / MANIFEST).read_text())
        except OSError as exc:
            raise FormatError(f"cannot read {root / MANIFEST}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise FormatError(f"{root / MANIFEST} is not valid JSON: {exc}") from exc
        try:
            entries = doc["slices"]
            files = [e["file"] for e in entries]
            splits = [e.get("split", "train") for e in entries]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed manifest: missing {exc}") from exc
        bad = sorted(set(splits) - {"train", "val"})
        if bad:
            raise FormatError(f"manifest has unknown splits: {bad}")
        return cls([load_slice(root / f) for f in files], [Path(f).stem for f in files], splits)
