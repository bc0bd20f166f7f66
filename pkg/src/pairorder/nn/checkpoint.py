"""Versioned binary checkpoint container.

Layout: 8-byte magic, little-endian uint32 format version, uint32 header
length, UTF-8 JSON header, then the raw tensor payloads back to back in
header order.  The header carries an arbitrary config dict plus the tensor
manifest (name, shape, dtype).  Model checkpoints store little-endian
float32; training-resume state uses float64 so a resumed run continues
bit-exactly in 64-bit mode.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"PAIRORD\x00"
VERSION = 1

_ALLOWED_DTYPES = ("<f4", "<f8")


def save_checkpoint(path, config: dict, tensors: dict[str, np.ndarray], dtype: str = "<f4") -> None:
    if dtype not in _ALLOWED_DTYPES:
        raise ValueError(f"unsupported checkpoint dtype {dtype!r}")
    manifest = [{"name": k, "shape": list(v.shape), "dtype": dtype} for k, v in tensors.items()]
    header = json.dumps({"config": config, "tensors": manifest}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        tensors: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            dt = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * dt.itemsize)
            if len(raw) != count * dt.itemsize:
                raise ValueError(f"{path}: truncated tensor {entry['name']!r}")
            tensors[entry["name"]] = np.frombuffer(raw, dtype=dt).reshape(shape).copy()
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after last tensor")
    return header["config"], tensors


def validate_shapes(expected: dict[str, np.ndarray], loaded: dict[str, np.ndarray], where: str) -> None:
    """Check a loaded tensor set against the shapes a freshly built model
    expects (names and shapes must match exactly)."""
    missing = sorted(set(expected) - set(loaded))
    extra = sorted(set(loaded) - set(expected))
    if missing or extra:
        raise ValueError(f"{where}: tensor names mismatch (missing={missing}, extra={extra})")
    for name, arr in expected.items():
        if tuple(loaded[name].shape) != tuple(arr.shape):
            raise ValueError(
                f"{where}: shape mismatch for {name!r}: "
                f"config implies {tuple(arr.shape)}, file has {tuple(loaded[name].shape)}"
            )
