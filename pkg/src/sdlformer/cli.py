"""Command-line entry point: synth, train, eval, recon, ablate.

Failures print one ``error[<kind>]: <message>`` line on stderr and exit
nonzero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from ._alloc import tune_allocator
from .config import load_run_config
from .data import Dataset, synthesize
from .errors import ConfigError, SDLFError
from .io import load_checkpoint, load_slice, save_checkpoint, to_uint8, write_gray
from .metrics import magnitude
from .tensor import Tensor
from .training import (ABLATIONS, EVAL_COLUMNS, LOG_COLUMNS, acquisition_mask, evaluate,
                       model_from_checkpoint, reconstruct, run_ablation, train)

RESIDUAL_GAIN = 5.0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _Usage(message)


class _Usage(Exception):
    pass


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 64x64, got {text!r}") from None
    return h, w


def _env_seed() -> int | None:
    raw = os.environ.get("SDLF_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"SDLF_SEED must be an integer, got {raw!r}") from None


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _write_csv(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def _run_config(args):
    model_over = {}
    for flag, key in (("no_sab", "enable_sab"), ("no_dab", "enable_dab"), ("no_locality", "enable_locality")):
        if getattr(args, flag, False):
            model_over[key] = False
    train_over = {k: getattr(args, k) for k in ("accel", "mode", "epochs", "seed")
                  if getattr(args, k, None) is not None}
    # seed precedence: flag, config file, SDLF_SEED, default
    if args.seed is None and "seed" not in _file_train_keys(args.config):
        env = _env_seed()
        if env is not None:
            train_over["seed"] = env
    return load_run_config(args.config, model_over, train_over)


def _file_train_keys(path) -> set:
    if path is None:
        return set()
    try:
        section = json.loads(Path(path).read_text()).get("train", {})
    except (OSError, ValueError, AttributeError):
        return set()  # load_run_config reports the problem
    return set(section) if isinstance(section, dict) else set()


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    h, w = args.size
    out = synthesize(args.out, args.slices, h, w, args.coils, seed=seed, val_slices=args.val_slices)
    print(f"wrote {args.slices} slices ({h}x{w}, {args.coils} coils, seed {seed}) to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    ds = Dataset.load(args.data)
    out = Path(args.out)
    log_path = Path(args.log) if args.log else out.with_suffix(".csv")
    last_path = Path(args.last) if args.last else out.with_suffix(".last.sdlc")
    resume = load_checkpoint(args.resume) if args.resume else None

    def progress(epoch, tr, va, lr):
        if not args.quiet:
            print(f"epoch {epoch:3d}  train {tr:.6f}  val {va:.6f}  lr {lr:.1e}", flush=True)

    res = train(ds, cfg.model, cfg.train, resume=resume, on_epoch=progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out, res.best)
    save_checkpoint(last_path, res.last)
    _write_csv(log_path, LOG_COLUMNS, res.log)
    m = res.best.meta["metrics"]
    print(f"parameters: {m['param_count']}")
    print(f"final validation loss: {m['final_val_loss']:.6f} (best {m['best_val_loss']:.6f} at epoch {m['best_epoch']})")
    return 0


def cmd_eval(args) -> int:
    model, tcfg = model_from_checkpoint(load_checkpoint(args.ckpt))
    ds = Dataset.load(args.data)
    accel = tcfg.accel if args.accel is None else args.accel
    split = None if args.split == "all" else args.split
    table = evaluate(model, ds, accel, seed=tcfg.seed, split=split)
    _write_csv(args.out, EVAL_COLUMNS, table)
    for r in table:
        if r["slice_id"] == "mean":
            print(f"{r['method']:>6}  PSNR {r['psnr_db']:.3f} dB  SSIM {r['ssim']:.4f}")
    return 0


def cmd_recon(args) -> int:
    model, tcfg = model_from_checkpoint(load_checkpoint(args.ckpt))
    sl = load_slice(args.slice)
    accel = tcfg.accel if args.accel is None else args.accel
    _, _, w = sl.shape
    mask = acquisition_mask(w, accel, tcfg.seed, args.index)
    y = Tensor(sl.kspace * mask.expand(sl.kspace.shape), dtype=model.dtype)
    recon = magnitude(reconstruct(model, y, Tensor(sl.maps, dtype=model.dtype), mask))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    img, lo, hi = to_uint8(recon)
    write_gray(out, img)
    lines = [f"reconstruction {out.name} min {lo!r} max {hi!r}"]
    print(f"wrote {out}")
    if sl.gt is None:
        print("notice: slice has no ground truth; residual map skipped")
    else:
        res_path = out.with_name(f"{out.stem}_residual{out.suffix}")
        resid = RESIDUAL_GAIN * np.abs(recon - magnitude(sl.gt))
        img, lo, hi = to_uint8(resid)
        write_gray(res_path, img)
        lines.append(f"residual {res_path.name} gain {RESIDUAL_GAIN!r} min {lo!r} max {hi!r}")
        print(f"wrote {res_path}")
    out.with_suffix(".txt").write_text("\n".join(lines) + "\n")
    return 0


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    ds = Dataset.load(args.data)
    rows = run_ablation(ds, cfg.model, cfg.train, rows=args.rows,
                        on_row=lambda r: print(f"{r['config']:<22} PSNR {r['psnr_db']:.3f} dB  "
                                               f"SSIM {r['ssim']:.4f}  params {r['params']}", flush=True))
    _write_csv(args.out, ("config", "psnr_db", "ssim", "params"), rows)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdlformer", description="Sparse + dense window transformer for multi-coil MRI reconstruction.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic multi-coil dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--slices", type=int, default=8)
    s.add_argument("--size", type=_size, default=(64, 64), help="HxW (default 64x64)")
    s.add_argument("--coils", type=int, default=4)
    s.add_argument("--seed", type=int)
    s.add_argument("--val-slices", type=int, help="validation slices taken from the end (default N//4)")
    s.set_defaults(func=cmd_synth)

    def run_flags(q):
        q.add_argument("--data", required=True)
        q.add_argument("--config", help="JSON file with optional 'model' and 'train' sections")
        q.add_argument("--accel", type=int, choices=(4, 5))
        q.add_argument("--mode", choices=("ssl", "supervised"))
        q.add_argument("--epochs", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--no-sab", action="store_true")
        q.add_argument("--no-dab", action="store_true")
        q.add_argument("--no-locality", action="store_true")

    t = sub.add_parser("train", help="train a model")
    run_flags(t)
    t.add_argument("--out", required=True, help="best checkpoint path")
    t.add_argument("--log", help="CSV log path (default: <out>.csv)")
    t.add_argument("--last", help="resumable final-state checkpoint (default: <out>.last.sdlc)")
    t.add_argument("--resume", help="continue from a --last checkpoint")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="PSNR/SSIM table for zero-filled and model reconstructions")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--accel", type=int, choices=(1, 4, 5), help="default: training acceleration")
    e.add_argument("--split", choices=("val", "train", "all"), default="val")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("recon", help="reconstruct one slice to a grayscale image")
    r.add_argument("--slice", required=True)
    r.add_argument("--ckpt", required=True)
    r.add_argument("--out", required=True, help=".png or .pgm")
    r.add_argument("--accel", type=int, choices=(1, 4, 5))
    r.add_argument("--index", type=int, default=0, help="slice index used to seed its mask")
    r.set_defaults(func=cmd_recon)

    a = sub.add_parser("ablate", help="train and score the block-ablation configurations")
    run_flags(a)
    a.add_argument("--out", required=True)
    a.add_argument("--rows", nargs="+", choices=list(ABLATIONS), metavar="ROW",
                   help=f"subset of: {', '.join(repr(k) for k in ABLATIONS)}")
    a.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _Usage as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return 2
    if args.command == "recon" and Path(args.out).suffix.lower() not in (".png", ".pgm"):
        print(f"error[usage]: --out must end in .png or .pgm, got {args.out!r}", file=sys.stderr)
        return 2
    tune_allocator()
    try:
        return args.func(args)
    except SDLFError as exc:
        print(f"error[{exc.kind}]: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
