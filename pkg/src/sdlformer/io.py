"""Binary formats: SDLK slice files, SDLC checkpoints, grayscale images.

All multi-byte values are little-endian.

SDLK slice::

    b"SDLK" u32 version=1 u32 Nc u32 H u32 W
    k-space      Nc*H*W complex64 (re, im interleaved), coil-major, row-major
    sensitivity  Nc*H*W complex64, same layout
    u8 has_gt, then H*W complex64 ground-truth image if has_gt == 1

SDLC checkpoint::

    b"SDLC" u32 version=1 u32 count
    count x (u16 name_len, name utf-8, u8 dtype 0=f32 1=f64, u8 ndim, ndim x u32 dim, raw data)
    u32 meta_len, meta as utf-8 JSON
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

SLICE_MAGIC = b"SDLK"
CKPT_MAGIC = b"SDLC"
VERSION = 1

_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


@dataclass
class SliceData:
    kspace: np.ndarray  # [Nc, 2, H, W], fully sampled
    maps: np.ndarray  # [Nc, 2, H, W]
    gt: np.ndarray | None = None  # [2, H, W]

    @property
    def shape(self) -> tuple[int, int, int]:
        nc, _, h, w = self.kspace.shape
        return nc, h, w


def _to_c64(a: np.ndarray) -> np.ndarray:
    c = np.empty(a.shape[:-3] + a.shape[-2:], dtype="<c8")
    c.real = a[..., 0, :, :]
    c.imag = a[..., 1, :, :]
    return c


def _from_c64(c: np.ndarray) -> np.ndarray:
    return np.stack([c.real, c.imag], axis=-3).astype(np.float64)


def encode_slice(sl: SliceData) -> bytes:
    nc, h, w = sl.shape
    if sl.maps.shape != sl.kspace.shape:
        raise FormatError(f"maps {sl.maps.shape} vs k-space {sl.kspace.shape}")
    parts = [SLICE_MAGIC, struct.pack("<4I", VERSION, nc, h, w),
             _to_c64(sl.kspace).tobytes(), _to_c64(sl.maps).tobytes()]
    if sl.gt is None:
        parts.append(b"\x00")
    else:
        if sl.gt.shape != (2, h, w):
            raise FormatError(f"ground truth {sl.gt.shape} vs slice {h}x{w}")
        parts += [b"\x01", _to_c64(sl.gt).tobytes()]
    return b"".join(parts)


def decode_slice(buf: bytes) -> SliceData:
    if buf[:4] != SLICE_MAGIC:
        raise FormatError("not an SDLK slice file (bad magic)")
    if len(buf) < 20:
        raise FormatError("truncated SDLK header")
    version, nc, h, w = struct.unpack_from("<4I", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported SDLK version {version}")
    n = nc * h * w * 8
    off = 20
    if len(buf) < off + 2 * n + 1:
        raise FormatError("truncated SDLK payload")
    ksp = np.frombuffer(buf, dtype="<c8", count=nc * h * w, offset=off).reshape(nc, h, w)
    maps = np.frombuffer(buf, dtype="<c8", count=nc * h * w, offset=off + n).reshape(nc, h, w)
    off += 2 * n
    flag = buf[off]
    off += 1
    gt = None
    if flag == 1:
        if len(buf) != off + h * w * 8:
            raise FormatError("truncated or oversized SDLK ground truth")
        gt = _from_c64(np.frombuffer(buf, dtype="<c8", count=h * w, offset=off).reshape(h, w))
    elif flag != 0 or len(buf) != off:
        raise FormatError("malformed SDLK ground-truth flag")
    return SliceData(_from_c64(ksp), _from_c64(maps), gt)


def save_slice(path, sl: SliceData) -> None:
    Path(path).write_bytes(encode_slice(sl))


def load_slice(path) -> SliceData:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read slice {path}: {exc.strerror}") from exc
    return decode_slice(buf)


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]
    meta: dict


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    parts = [CKPT_MAGIC, struct.pack("<II", VERSION, len(ckpt.tensors))]
    for name, arr in ckpt.tensors.items():
        arr = np.asarray(arr)
        if arr.dtype not in _CODES:
            raise FormatError(f"tensor {name}: unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<BB", _CODES[arr.dtype], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[_CODES[arr.dtype]]).tobytes())
    blob = json.dumps(ckpt.meta, sort_keys=True, allow_nan=True).encode("utf-8")
    parts.append(struct.pack("<I", len(blob)) + blob)
    return b"".join(parts)


def decode_checkpoint(buf: bytes) -> Checkpoint:
    if buf[:4] != CKPT_MAGIC:
        raise FormatError("not an SDLC checkpoint (bad magic)")
    try:
        version, count = struct.unpack_from("<II", buf, 4)
        if version != VERSION:
            raise FormatError(f"unsupported SDLC version {version}")
        off = 12
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", buf, off)
            off += 2
            name = buf[off:off + nlen].decode("utf-8")
            off += nlen
            code, ndim = struct.unpack_from("<BB", buf, off)
            off += 2
            if code not in _DTYPES:
                raise FormatError(f"tensor {name}: unknown dtype code {code}")
            dims = struct.unpack_from(f"<{ndim}I", buf, off)
            off += 4 * ndim
            dt = _DTYPES[code]
            count_el = int(np.prod(dims, dtype=np.int64))
            if off + count_el * dt.itemsize > len(buf):
                raise FormatError(f"tensor {name}: truncated data")
            arr = np.frombuffer(buf, dtype=dt, count=count_el, offset=off).reshape(dims)
            tensors[name] = arr.astype(dt.newbyteorder("="))
            off += count_el * dt.itemsize
        (mlen,) = struct.unpack_from("<I", buf, off)
        off += 4
        if off + mlen != len(buf):
            raise FormatError("checkpoint metadata length does not match file size")
        meta = json.loads(buf[off:off + mlen].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint: {exc}") from exc
    return Checkpoint(tensors, meta)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    Path(path).write_bytes(encode_checkpoint(ckpt))


def load_checkpoint(path) -> Checkpoint:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc.strerror}") from exc
    return decode_checkpoint(buf)


# ---------------------------------------------------------------------------
# 8-bit grayscale images


def to_uint8(img: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Min-max scale to 0..255; returns the image and the (lo, hi) used."""
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo
    scaled = np.zeros(img.shape) if span == 0 else (img - lo) / span
    return np.round(scaled * 255).astype(np.uint8), lo, hi


def _png_chunk(tag: bytes, data: bytes) -> bytes:
    body = tag + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def encode_png(img: np.ndarray) -> bytes:
    h, w = img.shape
    raw = b"".join(b"\x00" + img[r].tobytes() for r in range(h))
    header = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + _png_chunk(b"IHDR", header)
            + _png_chunk(b"IDAT", zlib.compress(raw, 9)) + _png_chunk(b"IEND", b""))


def encode_pgm(img: np.ndarray) -> bytes:
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.astype(np.uint8).tobytes()


def write_gray(path, img: np.ndarray) -> None:
    path = Path(path)
    if path.suffix.lower() == ".png":
        path.write_bytes(encode_png(img))
    elif path.suffix.lower() == ".pgm":
        path.write_bytes(encode_pgm(img))
    else:
        raise FormatError(f"unsupported image extension {path.suffix!r} (use .png or .pgm)")
