"""PFM (float) and binary PGM (label) rasters.

PFM follows the Netpbm convention: header ``PF`` (3 channels) or ``Pf``
(1 channel), then ``width height``, then a scale line whose sign gives the
byte order (negative = little-endian). Rows are stored bottom to top.
Arrays returned here are top-to-bottom, ``[row, col]``.
"""

from __future__ import annotations

import os

import numpy as np

from semgeo.errors import InputError

MAX_DIM = 1 << 15


def _read_tokens(buf: bytes, count: int, pos: int = 0) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    tokens: list[bytes] = []
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputError("truncated header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the payload
    if pos >= n:
        raise InputError("truncated header")
    return tokens, pos + 1


def _dims(w_tok: bytes, h_tok: bytes) -> tuple[int, int]:
    try:
        w, h = int(w_tok), int(h_tok)
    except ValueError:
        raise InputError(f"bad dimensions {w_tok!r} {h_tok!r}") from None
    if not (0 < w <= MAX_DIM and 0 < h <= MAX_DIM):
        raise InputError(f"dimensions {w}x{h} out of range (max {MAX_DIM})")
    return w, h


def read_pfm(path) -> np.ndarray:
    """Float32 raster of shape ``(h, w)`` or ``(h, w, 3)``."""
    with open(path, "rb") as fh:
        buf = fh.read()
    (magic, w_tok, h_tok, scale_tok), pos = _read_tokens(buf, 4)
    if magic == b"Pf":
        channels = 1
    elif magic == b"PF":
        channels = 3
    else:
        raise InputError(f"{path}: bad PFM magic {magic[:8]!r}")
    w, h = _dims(w_tok, h_tok)
    try:
        scale = float(scale_tok)
    except ValueError:
        raise InputError(f"{path}: bad PFM scale {scale_tok!r}") from None
    if scale == 0.0 or not np.isfinite(scale):
        raise InputError(f"{path}: PFM scale must be non-zero and finite")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    n = w * h * channels
    if len(buf) - pos < n * 4:
        raise InputError(f"{path}: truncated PFM payload ({len(buf) - pos} of {n * 4} bytes)")
    data = np.frombuffer(buf, dtype=dtype, count=n, offset=pos).astype(np.float32)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return np.ascontiguousarray(data.reshape(shape)[::-1])


def write_pfm(path, raster, little_endian: bool = True) -> None:
    arr = np.asarray(raster, dtype=np.float32)
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise InputError(f"PFM holds (h, w) or (h, w, 3) rasters, got {arr.shape}")
    h, w = arr.shape[:2]
    _dims(str(w).encode(), str(h).encode())
    dtype = np.dtype("<f4") if little_endian else np.dtype(">f4")
    scale = b"-1.0" if little_endian else b"1.0"
    payload = np.ascontiguousarray(arr[::-1]).astype(dtype).tobytes()
    _atomic_write(path, magic + b"\n%d %d\n" % (w, h) + scale + b"\n" + payload)


def read_pgm(path) -> np.ndarray:
    """Binary (P5) PGM as an integer ``(h, w)`` array (uint8 or uint16)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    (magic, w_tok, h_tok, max_tok), pos = _read_tokens(buf, 4)
    if magic != b"P5":
        raise InputError(f"{path}: bad PGM magic {magic[:8]!r} (only binary P5 is supported)")
    w, h = _dims(w_tok, h_tok)
    try:
        maxval = int(max_tok)
    except ValueError:
        raise InputError(f"{path}: bad PGM maxval {max_tok!r}") from None
    if not 0 < maxval <= 65535:
        raise InputError(f"{path}: PGM maxval {maxval} outside [1, 65535]")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    n = w * h
    if len(buf) - pos < n * dtype.itemsize:
        raise InputError(f"{path}: truncated PGM payload")
    data = np.frombuffer(buf, dtype=dtype, count=n, offset=pos)
    if data.size and int(data.max()) > maxval:
        raise InputError(f"{path}: sample value exceeds maxval {maxval}")
    return data.astype(np.uint8 if maxval < 256 else np.uint16).reshape(h, w)


def write_pgm(path, labels, maxval: int = 65535) -> None:
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise InputError(f"PGM holds 2-D rasters, got {arr.shape}")
    if not 0 < maxval <= 65535:
        raise InputError(f"maxval {maxval} outside [1, 65535]")
    if arr.size and (arr.min() < 0 or arr.max() > maxval):
        raise InputError(f"label values must lie in [0, {maxval}]")
    h, w = arr.shape
    _dims(str(w).encode(), str(h).encode())
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    header = b"P5\n%d %d\n%d\n" % (w, h, maxval)
    _atomic_write(path, header + arr.astype(dtype).tobytes())


def _atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)

