"""Binary model container.

Layout (little-endian):

    magic   4 bytes  b"IMNN"
    version u32      currently 1
    meta    u64 length + UTF-8 JSON (architecture name + hyperparameters)
    count   u32      number of weight blobs
    blob*   u16 name length, name UTF-8, u8 dtype (0=f64, 1=f32),
            u8 ndim, u32 per dim, raw array bytes

Round trips are exact: loading returns bit-identical arrays.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelError

MAGIC = b"IMNN"
VERSION = 1
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}
_DTYPE_TAGS = {np.dtype("float64"): 0, np.dtype("float32"): 1}


@dataclass
class ModelBundle:
    arch: str
    meta: dict = field(default_factory=dict)
    arrays: dict = field(default_factory=dict)  # name -> np.ndarray


def save_model(bundle: ModelBundle, path) -> None:
    header = json.dumps({"arch": bundle.arch, "meta": bundle.meta},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(bundle.arrays)))
        for name in sorted(bundle.arrays):
            arr = np.ascontiguousarray(bundle.arrays[name])
            if arr.dtype not in _DTYPE_TAGS:
                arr = arr.astype(np.float64)
            tag = _DTYPE_TAGS[arr.dtype]
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<BB", tag, arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<I", d))
            fh.write(arr.tobytes())


def load_model(path) -> ModelBundle:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ModelError(f"not a model file (bad magic {data[:4]!r})")
    off = 4
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != VERSION:
        raise ModelError(f"unsupported model format version {version}")
    (meta_len,) = struct.unpack_from("<Q", data, off)
    off += 8
    try:
        header = json.loads(data[off:off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelError(f"corrupt model header: {exc}") from exc
    off += meta_len
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + name_len].decode("utf-8")
        off += name_len
        tag, ndim = struct.unpack_from("<BB", data, off)
        off += 2
        if tag not in _DTYPES:
            raise ModelError(f"unknown dtype tag {tag} for {name!r}")
        shape = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        dtype = _DTYPES[tag]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        arr = np.frombuffer(data[off:off + nbytes], dtype=dtype).reshape(shape).copy()
        off += nbytes
        arrays[name] = arr
    if off != len(data):
        raise ModelError("trailing bytes after last weight blob")
    return ModelBundle(arch=header["arch"], meta=header["meta"], arrays=arrays)


def params_to_arrays(params) -> dict:
    out = {}
    for name, p in params:
        if name in out:
            raise ModelError(f"duplicate parameter name {name!r}")
        out[name] = p.data.copy()
    return out


def load_params(params, arrays: dict) -> None:
    """Copy arrays into an existing parameter set, shape-checked."""
    for name, p in params:
        if name not in arrays:
            raise ModelError(f"missing weight {name!r}")
        arr = np.asarray(arrays[name], dtype=np.float64)
        if arr.shape != p.data.shape:
            raise ModelError(
                f"weight {name!r} has shape {arr.shape}, expected {p.data.shape}")
        p.data[...] = arr
