"""Checkpoint persistence.

A checkpoint is a flat binary dump: a magic line, a JSON header with the
schema version, run metadata, and the name/dtype/shape of every entry, then
the raw little-endian array bytes in header order.  The format has no
timestamps, so identical parameters and metadata produce byte-identical
files (run reproducibility is checked by hashing them).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .autodiff import Tensor

CHECKPOINT_SCHEMA_VERSION = 1
_MAGIC = b"EPIMARLCKPT1\n"


def save_checkpoint(path, params: dict[str, Tensor], meta: dict,
                    extra_arrays: dict[str, np.ndarray] | None = None) -> None:
    meta = dict(meta)
    meta.setdefault("schema_version", CHECKPOINT_SCHEMA_VERSION)
    arrays: dict[str, np.ndarray] = {
        f"param/{k}": np.ascontiguousarray(v.data) for k, v in params.items()
    }
    if extra_arrays:
        arrays.update(
            {f"extra/{k}": np.ascontiguousarray(v) for k, v in extra_arrays.items()}
        )
    entries = [
        {"name": name, "dtype": arrays[name].dtype.str, "shape": list(arrays[name].shape)}
        for name in sorted(arrays)
    ]
    header = json.dumps({"meta": meta, "entries": entries}, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for entry in entries:
            fh.write(arrays[entry["name"]].tobytes())


def load_checkpoint(path) -> tuple[dict[str, Tensor], dict, dict[str, np.ndarray]]:
    """Returns (params, meta, extra_arrays); params require gradients."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        index = json.loads(fh.read(hlen).decode())
        meta = index["meta"]
        if meta.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported checkpoint schema_version {meta.get('schema_version')!r}"
            )
        params: dict[str, Tensor] = {}
        extra: dict[str, np.ndarray] = {}
        for entry in index["entries"]:
            dtype = np.dtype(entry["dtype"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(fh.read(count * dtype.itemsize), dtype=dtype).reshape(shape)
            name = entry["name"]
            if name.startswith("param/"):
                params[name[len("param/"):]] = Tensor(arr.copy(), requires_grad=True)
            elif name.startswith("extra/"):
                extra[name[len("extra/"):]] = arr.copy()
    return params, meta, extra


def checkpoint_digest(path) -> str:
    """SHA-256 of the checkpoint file bytes (the format is deterministic)."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
