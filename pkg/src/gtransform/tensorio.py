"""Binary tensor files and model checkpoints.

Tensor file layout (all little-endian)::

    b"GTTF" | u32 version=1 | u8 dtype | u8 ndim | u64 dims[ndim] | payload

``dtype`` 0 is float64, 1 is complex stored as interleaved float64
(real, imag) pairs. The payload is row-major.

A checkpoint is a container of named tensor files plus a text block of
general-transform parameters::

    b"GTCK" | u32 version=1 | u32 count
    count x ( u16 name_len | name utf-8 | u64 blob_len | tensor file bytes )
    u64 text_len | text utf-8
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import FormatError

MAGIC = b"GTTF"
CKPT_MAGIC = b"GTCK"
VERSION = 1
REAL64, COMPLEX128 = 0, 1
_ITEMSIZE = {REAL64: 8, COMPLEX128: 16}


def tensor_to_bytes(a) -> bytes:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        code, payload = COMPLEX128, np.ascontiguousarray(a, dtype="<c16")
    else:
        code, payload = REAL64, np.ascontiguousarray(a, dtype="<f8")
    if a.ndim > 255:
        raise FormatError("too many dimensions")
    head = MAGIC + struct.pack("<IBB", VERSION, code, a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape)
    return head + payload.tobytes()


def tensor_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < 10 or data[:4] != MAGIC:
        raise FormatError("not a GTTF tensor file (bad magic)")
    version, code, ndim = struct.unpack_from("<IBB", data, 4)
    if version != VERSION:
        raise FormatError(f"unsupported tensor file version {version}")
    if code not in _ITEMSIZE:
        raise FormatError(f"unknown dtype code {code}")
    off = 10 + 8 * ndim
    if len(data) < off:
        raise FormatError("truncated tensor header")
    dims = struct.unpack_from(f"<{ndim}Q", data, 10)
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    expected = count * _ITEMSIZE[code]
    if len(data) - off != expected:
        raise FormatError(f"payload is {len(data) - off} bytes, expected {expected}")
    dtype = "<f8" if code == REAL64 else "<c16"
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=off).reshape(dims)
    return arr.astype(arr.dtype.newbyteorder("="), copy=True)


def atomic_write(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tensor(path, a) -> None:
    atomic_write(path, tensor_to_bytes(a))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


def checkpoint_to_bytes(tensors: dict, text: str = "") -> bytes:
    parts = [CKPT_MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, a in tensors.items():
        raw = name.encode("utf-8")
        blob = tensor_to_bytes(a)
        parts += [struct.pack("<H", len(raw)), raw, struct.pack("<Q", len(blob)), blob]
    body = text.encode("utf-8")
    parts += [struct.pack("<Q", len(body)), body]
    return b"".join(parts)


def checkpoint_from_bytes(data: bytes):
    if data[:4] != CKPT_MAGIC:
        raise FormatError("not a GTCK checkpoint (bad magic)")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        pos = 12
        tensors = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + nlen].decode("utf-8")
            pos += nlen
            (blen,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            tensors[name] = tensor_from_bytes(data[pos:pos + blen])
            pos += blen
        (tlen,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        text = data[pos:pos + tlen].decode("utf-8")
        if pos + tlen != len(data):
            raise FormatError("trailing bytes after checkpoint text block")
    except (struct.error, UnicodeDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint: {exc}") from None
    return tensors, text


def write_checkpoint(path, tensors: dict, text: str = "") -> None:
    atomic_write(path, checkpoint_to_bytes(tensors, text))


def read_checkpoint(path):
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read())
