"""Objectives, Adam, step schedule, the training loop, evaluation and ablations."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import mri
from . import tensor as T
from .config import ModelConfig, TrainConfig, model_config_from_dict, train_config_from_dict
from .data import Dataset, derive_seed
from .errors import ConfigError, FormatError, NonFiniteError, ResampleError, ShapeError
from .io import Checkpoint
from .metrics import magnitude, psnr, ssim
from .net import SDLFormer
from .tensor import Param, Tensor

# stream tags for derive_seed
_MASK, _SPLIT, _VAL_SPLIT, _SHUFFLE = 1, 2, 3, 4
_MAX_RESAMPLE = 100

LOG_COLUMNS = ("epoch", "split", "loss", "lr")
EVAL_COLUMNS = ("slice_id", "method", "psnr_db", "ssim")


# ---------------------------------------------------------------------------
# objectives


def ssl_loss(x_pred: Tensor, s, m2: mri.SamplingMask, y2) -> Tensor:
    """Mean absolute k-space error over the loss-mask columns of every coil.

    ``y2`` may be full or pre-masked k-space; only ``m2`` columns are read.
    """
    cols = np.flatnonzero(m2.cols)
    if cols.size == 0:
        raise ResampleError("loss mask m2 selects no k-space columns")
    k = T.fft2c(mri.expand_coils(x_pred, s))
    y2 = y2.data if isinstance(y2, Tensor) else np.asarray(y2)
    if y2.shape != k.shape:
        raise ShapeError(f"target k-space {y2.shape} vs prediction {k.shape}")
    return T.l1_loss(k[..., cols], Tensor(y2[..., cols], dtype=k.dtype))


def supervised_loss(x_pred: Tensor, x_gt) -> Tensor:
    x_gt = x_gt if isinstance(x_gt, Tensor) else Tensor(x_gt, dtype=x_pred.dtype)
    return T.l1_loss(x_pred, x_gt)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class OptimState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: list[Param], grads: list[np.ndarray | None], state: OptimState) -> None:
    """One bias-corrected Adam update, in place; no weight decay.

    A ``None`` gradient counts as zero (the parameter did not touch the loss).
    """
    if len(params) != len(grads):
        raise ConfigError(f"{len(params)} params but {len(grads)} gradients")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g in zip(params, grads):
        key = p.name
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(key)
        if m is None:
            m = state.m[key] = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        upd = (state.lr / c1) * m / (np.sqrt(v / c2) + state.eps)
        p.data = (p.data - upd).astype(p.dtype, copy=False)


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    return cfg.lr * cfg.sched_gamma ** (epoch // cfg.sched_step)


# ---------------------------------------------------------------------------
# per-slice acquisition


def acquisition_mask(w: int, accel: int, seed: int, index: int) -> mri.SamplingMask:
    return mri.make_mask(w, accel, seed=derive_seed(seed, _MASK, index, accel))


def draw_split(m: mri.SamplingMask, rho: float, *seed_parts: int) -> mri.SplitMasks:
    """Seeded (m1, m2) split; redraws on an empty loss mask."""
    for attempt in range(_MAX_RESAMPLE):
        try:
            return mri.split_mask(m, rho, seed=derive_seed(*seed_parts, attempt))
        except ResampleError:
            continue
    raise ResampleError(f"no non-empty split after {_MAX_RESAMPLE} draws (too few non-ACS columns?)")


@dataclass
class _Prepared:
    y: Tensor  # acquired (masked) k-space
    s: Tensor
    gt: Tensor | None
    mask: mri.SamplingMask


def _prepare(ds: Dataset, index: int, accel: int, seed: int, dtype) -> _Prepared:
    sl = ds.slices[index]
    _, _, w = sl.shape
    mask = acquisition_mask(w, accel, seed, index)
    y = sl.kspace * mask.expand(sl.kspace.shape)
    gt = None if sl.gt is None else Tensor(sl.gt, dtype=dtype)
    return _Prepared(Tensor(y, dtype=dtype), Tensor(sl.maps, dtype=dtype), gt, mask)


def _masked(y: Tensor, m: mri.SamplingMask) -> Tensor:
    return Tensor(y.data * m.expand(y.shape, y.dtype))


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    best: Checkpoint
    last: Checkpoint
    log: list[dict]
    model: SDLFormer

    @property
    def best_val_loss(self) -> float:
        return self.best.meta["metrics"]["best_val_loss"]


def _nonfinite_params(params: list[Param]) -> str | None:
    for p in params:
        if p.grad is not None and not np.isfinite(p.grad).all():
            return f"gradient of {p.name}"
        if not np.isfinite(p.data).all():
            return f"parameter {p.name}"
    return None


def _step_loss(model: SDLFormer, prep: _Prepared, mode: str, split: mri.SplitMasks | None) -> Tensor:
    if mode == "supervised":
        if prep.gt is None:
            raise FormatError("supervised training needs ground-truth images in every slice")
        return supervised_loss(model(prep.y, prep.s, prep.mask), prep.gt)
    y1 = _masked(prep.y, split.m1)
    x = model(y1, prep.s, split.m1)
    return ssl_loss(x, prep.s, split.m2, prep.y)


def _validate(model, preps, indices, tcfg) -> float:
    if not indices:
        return math.nan
    total = 0.0
    with T.no_grad():
        for i in indices:
            split = None
            if tcfg.mode == "ssl":
                split = draw_split(preps[i].mask, tcfg.rho, tcfg.seed, _VAL_SPLIT, i)
            total += _step_loss(model, preps[i], tcfg.mode, split).item()
    return total / len(indices)


def _meta(mcfg, tcfg, n_coils, kind, epoch, extra) -> dict:
    return {"kind": kind, "epoch": epoch, "n_coils": n_coils,
            "model": dataclasses.asdict(mcfg), "train": dataclasses.asdict(tcfg), **extra}


def train(ds: Dataset, mcfg: ModelConfig, tcfg: TrainConfig, resume: Checkpoint | None = None,
          on_epoch=None) -> TrainResult:
    """Seeded, sequential training; keeps the parameters with the lowest validation loss.

    Without validation slices the training loss is used for retention.
    ``resume`` takes a ``last`` checkpoint of an identically configured run.
    """
    dtype = np.dtype(tcfg.dtype)
    n_coils, _, _ = ds.shape
    model = SDLFormer(mcfg, n_coils, seed=tcfg.seed, dtype=dtype)
    named = model.named_params()
    params = list(named.values())
    opt = OptimState(lr=tcfg.lr)
    train_idx, val_idx = ds.indices("train"), ds.indices("val")
    if not train_idx:
        raise ConfigError("dataset has no training slices")
    preps = [_prepare(ds, i, tcfg.accel, tcfg.seed, dtype) for i in range(len(ds.slices))]

    log: list[dict] = []
    best_state = model.state_dict()
    best_loss, best_epoch, start = math.inf, -1, 0
    if resume is not None:
        start, best_state, best_loss, best_epoch, log = _restore(resume, model, opt, mcfg, tcfg)

    for epoch in range(start, tcfg.epochs):
        opt.lr = lr = lr_at(epoch, tcfg)
        order = np.random.default_rng(derive_seed(tcfg.seed, _SHUFFLE, epoch)).permutation(train_idx)
        total = 0.0
        for i in order:
            i = int(i)
            split = None
            if tcfg.mode == "ssl":
                split = draw_split(preps[i].mask, tcfg.rho, tcfg.seed, _SPLIT, i, epoch)
            loss = _step_loss(model, preps[i], tcfg.mode, split)
            if not np.isfinite(loss.data).all():
                where = model.first_nonfinite() or "loss"
                raise NonFiniteError(f"non-finite loss at epoch {epoch}, slice {ds.ids[i]}; first bad tensor: {where}")
            model.zero_grad()
            loss.backward()
            bad = _nonfinite_params(params)
            if bad:
                raise NonFiniteError(f"non-finite {bad} at epoch {epoch}, slice {ds.ids[i]}")
            adam_step(params, [p.grad for p in params], opt)
            total += loss.item()
        train_loss = total / len(order)
        val_loss = _validate(model, preps, val_idx, tcfg)
        log.append({"epoch": epoch, "split": "train", "loss": train_loss, "lr": lr})
        if val_idx:
            log.append({"epoch": epoch, "split": "val", "loss": val_loss, "lr": lr})
        score = val_loss if val_idx else train_loss
        if score < best_loss:
            best_loss, best_epoch, best_state = score, epoch, model.state_dict()
        if on_epoch is not None:
            on_epoch(epoch, train_loss, val_loss, lr)

    final_val = log[-1]["loss"]
    metrics = {"best_epoch": best_epoch, "best_val_loss": best_loss, "final_val_loss": final_val,
               "param_count": model.param_count()}
    best = Checkpoint(dict(best_state), _meta(mcfg, tcfg, n_coils, "best", best_epoch, {"metrics": metrics}))
    last_tensors = dict(model.state_dict())
    for name in named:
        last_tensors[f"optim.m.{name}"] = opt.m[name].copy()
        last_tensors[f"optim.v.{name}"] = opt.v[name].copy()
        last_tensors[f"best.{name}"] = best_state[name]
    last = Checkpoint(last_tensors, _meta(mcfg, tcfg, n_coils, "last", tcfg.epochs - 1,
                                          {"metrics": metrics, "optim_step": opt.step, "log": log}))
    model.load_state_dict(best_state)
    return TrainResult(best, last, log, model)


def _restore(ckpt: Checkpoint, model: SDLFormer, opt: OptimState, mcfg, tcfg):
    meta = ckpt.meta
    if meta.get("kind") != "last":
        raise FormatError("resume needs the 'last' checkpoint of a run, not a best checkpoint")
    if model_config_from_dict(meta["model"]) != mcfg:
        raise ConfigError("resume checkpoint was trained with a different model configuration")
    prev = train_config_from_dict(meta["train"])
    if dataclasses.replace(prev, epochs=tcfg.epochs) != tcfg:
        raise ConfigError("resume checkpoint was trained with different training settings")
    names = list(model.named_params())
    t = ckpt.tensors
    try:
        model.load_state_dict({n: t[n] for n in names})
        opt.m = {n: t[f"optim.m.{n}"].copy() for n in names}
        opt.v = {n: t[f"optim.v.{n}"].copy() for n in names}
        best_state = {n: t[f"best.{n}"].copy() for n in names}
    except KeyError as exc:
        raise FormatError(f"resume checkpoint lacks tensor {exc}") from exc
    opt.step = int(meta["optim_step"])
    m = meta["metrics"]
    return int(meta["epoch"]) + 1, best_state, float(m["best_val_loss"]), int(m["best_epoch"]), list(meta["log"])


def model_from_checkpoint(ckpt: Checkpoint) -> tuple[SDLFormer, TrainConfig]:
    try:
        mcfg = model_config_from_dict(ckpt.meta["model"])
        tcfg = train_config_from_dict(ckpt.meta["train"])
        n_coils = int(ckpt.meta["n_coils"])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"checkpoint metadata lacks {exc}") from exc
    model = SDLFormer(mcfg, n_coils, seed=tcfg.seed, dtype=np.dtype(tcfg.dtype))
    names = set(model.named_params())
    model.load_state_dict({k: v for k, v in ckpt.tensors.items() if k in names}
                          if ckpt.meta.get("kind") == "last" else ckpt.tensors)
    return model, tcfg


# ---------------------------------------------------------------------------
# evaluation


def reconstruct(model: SDLFormer, y: Tensor, s: Tensor, mask: mri.SamplingMask) -> np.ndarray:
    """Model reconstruction from acquired k-space (all measured columns as input)."""
    with T.no_grad():
        return model(y, s, mask).data


def evaluate(model: SDLFormer | None, ds: Dataset, accel: int, seed: int = 0,
             split: str | None = "val") -> list[dict]:
    """Per-slice ZF (and model) PSNR/SSIM rows followed by one mean row per method.

    ``split=None`` evaluates every slice.
    """
    idx = list(range(len(ds.slices))) if split is None else ds.indices(split)
    if not idx:
        raise ConfigError(f"dataset has no {split!r} slices to evaluate")
    methods = ["ZF"] + ([] if model is None else ["model"])
    dtype = model.dtype if model is not None else np.float64
    rows: dict[str, list[dict]] = {m: [] for m in methods}
    for i in idx:
        if ds.slices[i].gt is None:
            raise FormatError(f"slice {ds.ids[i]} has no ground truth to score against")
        prep = _prepare(ds, i, accel, seed, dtype)
        ref = magnitude(ds.slices[i].gt)
        y64 = ds.slices[i].kspace * prep.mask.expand(ds.slices[i].kspace.shape)
        outs = {"ZF": magnitude(mri.zero_filled(Tensor(y64), Tensor(ds.slices[i].maps)))}
        if model is not None:
            outs["model"] = magnitude(reconstruct(model, prep.y, prep.s, prep.mask))
        for m in methods:
            rows[m].append({"slice_id": ds.ids[i], "method": m,
                            "psnr_db": psnr(ref, outs[m]), "ssim": ssim(ref, outs[m])})
    table = []
    for m in methods:
        table += rows[m]
    for m in methods:
        table.append({"slice_id": "mean", "method": m,
                      "psnr_db": float(np.mean([r["psnr_db"] for r in rows[m]])),
                      "ssim": float(np.mean([r["ssim"] for r in rows[m]]))})
    return table


def mean_row(table: list[dict], method: str) -> dict:
    return next(r for r in table if r["slice_id"] == "mean" and r["method"] == method)


# ---------------------------------------------------------------------------
# ablation matrix

ABLATIONS = {
    "CNN": dict(enable_sab=False, enable_dab=False),
    "SAB": dict(enable_dab=False),
    "DAB": dict(enable_sab=False),
    "SAB+DAB w/o locality": dict(enable_locality=False),
    "SAB+DAB": {},
}


def run_ablation(ds: Dataset, mcfg: ModelConfig, tcfg: TrainConfig, rows=None, on_row=None) -> list[dict]:
    """Train and evaluate each configuration; one mean PSNR/SSIM row per entry."""
    names = list(ABLATIONS) if rows is None else list(rows)
    unknown = [n for n in names if n not in ABLATIONS]
    if unknown:
        raise ConfigError(f"unknown ablation rows {unknown}; choose from {list(ABLATIONS)}")
    out = []
    for name in names:
        cfg = dataclasses.replace(mcfg, **ABLATIONS[name])
        res = train(ds, cfg, tcfg)
        mr = mean_row(evaluate(res.model, ds, tcfg.accel, tcfg.seed), "model")
        row = {"config": name, "psnr_db": mr["psnr_db"], "ssim": mr["ssim"],
               "params": res.model.param_count()}
        out.append(row)
        if on_row is not None:
            on_row(row)
    return out
