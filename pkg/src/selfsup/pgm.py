"""Portable graymap I/O.

Binary (P5) and plain (P2) graymaps are read with any maxval; writing always
produces 16-bit binary P5 with ``0.0 -> 0`` and ``1.0 -> 65535``.  ``.npy``
paths are passed through numpy for lossless float storage.
"""

from __future__ import annotations

import os

import numpy as np

MAXVAL = 65535


class PgmError(ValueError):
    pass


def _tokens(data: bytes, count: int, pos: int = 0):
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise PgmError("truncated header")
        out.append(data[start:pos])
    return out, pos


def decode_pgm(data: bytes) -> np.ndarray:
    (magic, w, h, maxval), pos = _tokens(data, 4)
    try:
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise PgmError("non-numeric header field") from None
    if width < 1 or height < 1 or not 0 < maxval <= 65535:
        raise PgmError(f"bad header: {width}x{height}, maxval {maxval}")
    if magic == b"P5":
        pos += 1  # single whitespace before the raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        nbytes = width * height * dtype.itemsize
        raw = data[pos:pos + nbytes]
        if len(raw) != nbytes:
            raise PgmError(f"raster truncated: {len(raw)} of {nbytes} bytes")
        vals = np.frombuffer(raw, dtype=dtype)
    elif magic == b"P2":
        toks, _ = _tokens(data, width * height, pos)
        vals = np.array([int(t) for t in toks])
    else:
        raise PgmError(f"unsupported magic {magic!r}")
    if vals.max(initial=0) > maxval:
        raise PgmError("sample exceeds maxval")
    return vals.reshape(height, width).astype(np.float64) / maxval


def encode_pgm(img) -> tuple[bytes, int]:
    """16-bit P5 bytes for *img*; also returns how many pixels were clipped to [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("expected a 2-D image")
    clipped = int(np.count_nonzero((img < 0) | (img > 1)))
    q = np.rint(np.clip(img, 0.0, 1.0) * MAXVAL).astype(">u2")
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n{MAXVAL}\n".encode()
    return header + q.tobytes(), clipped


def read_image(path) -> np.ndarray:
    if str(path).endswith(".npy"):
        img = np.load(path)
        if img.ndim != 2:
            raise PgmError(f"{path}: expected a 2-D array")
        return img.astype(np.float64)
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def write_image(path, img) -> int:
    """Write *img*; returns the number of clipped pixels (always 0 for ``.npy``)."""
    if str(path).endswith(".npy"):
        np.save(path, np.asarray(img, dtype=np.float64))
        return 0
    data, clipped = encode_pgm(img)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return clipped
