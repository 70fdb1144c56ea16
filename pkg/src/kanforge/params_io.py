"""Flat binary container for named float64 parameter tensors.

Layout (all integers little-endian):

    magic  b"KFPM"
    u32    format version (currently 1)
    u32    entry count
    entry: u16 name length, utf-8 name,
           u8 ndim, ndim * u32 dims,
           prod(dims) * f64 payload

Round-trips are bit-exact; entry order is preserved.
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO, Iterable

import numpy as np

MAGIC = b"KFPM"
VERSION = 1


class ParamFormatError(ValueError):
    """Raised when a parameter container is malformed."""


def write_params(dest, entries: Iterable[tuple[str, np.ndarray]]) -> None:
    """Write (name, array) entries to a path or binary file object."""
    if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
        with open(dest, "wb") as f:
            _write(f, list(entries))
    else:
        _write(dest, list(entries))


def read_params(src) -> list[tuple[str, np.ndarray]]:
    """Read entries back in their stored order."""
    if isinstance(src, (str, bytes)) or hasattr(src, "__fspath__"):
        with open(src, "rb") as f:
            return _read(f)
    return _read(src)


def params_to_bytes(entries: Iterable[tuple[str, np.ndarray]]) -> bytes:
    buf = io.BytesIO()
    _write(buf, list(entries))
    return buf.getvalue()


def params_from_bytes(blob: bytes) -> list[tuple[str, np.ndarray]]:
    return _read(io.BytesIO(blob))


def _write(f: BinaryIO, entries: list[tuple[str, np.ndarray]]) -> None:
    f.write(MAGIC)
    f.write(struct.pack("<II", VERSION, len(entries)))
    for name, arr in entries:
        data = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
        encoded = name.encode("utf-8")
        f.write(struct.pack("<H", len(encoded)))
        f.write(encoded)
        f.write(struct.pack("<B", data.ndim))
        f.write(struct.pack(f"<{data.ndim}I", *data.shape))
        f.write(data.astype("<f8", copy=False).tobytes())


def _read(f: BinaryIO) -> list[tuple[str, np.ndarray]]:
    magic = f.read(4)
    if magic != MAGIC:
        raise ParamFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, count = struct.unpack("<II", _take(f, 8))
    if version != VERSION:
        raise ParamFormatError(f"unsupported container version {version}")
    entries = []
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _take(f, 2))
        name = _take(f, name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", _take(f, 1))
        shape = struct.unpack(f"<{ndim}I", _take(f, 4 * ndim)) if ndim else ()
        n = int(np.prod(shape)) if shape else 1
        payload = _take(f, 8 * n)
        arr = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)
        entries.append((name, arr))
    return entries


def _take(f: BinaryIO, n: int) -> bytes:
    blob = f.read(n)
    if len(blob) != n:
        raise ParamFormatError(f"truncated container: wanted {n} bytes, got {len(blob)}")
    return blob
