"""Checkpoint container: a versioned JSON manifest plus raw float64 sections.

Layout::

    b"BTCKPT\\0\\0"               8-byte magic
    uint32 LE                     format version
    uint64 LE + bytes             manifest, UTF-8 JSON with sorted keys
    for every section, in manifest order:
        uint64 LE + bytes         little-endian float64 values, C order

The manifest lists each section's name and shape and carries arbitrary
JSON metadata.  Sections are written in sorted-name order and the JSON is
canonical, so save -> load -> save reproduces the same bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .nn.optim import Adam

MAGIC = b"BTCKPT\0\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def dumps_checkpoint(tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> bytes:
    names = sorted(tensors)
    # ascontiguousarray would promote 0-d arrays to 1-d
    arrays = [np.array(tensors[n], dtype="<f8", order="C") for n in names]
    for n, a in zip(names, arrays):
        if not np.all(np.isfinite(a)):
            raise CheckpointError(f"section {n!r} holds non-finite values")
    manifest = {
        "version": VERSION,
        "sections": [{"name": n, "shape": list(a.shape)} for n, a in zip(names, arrays)],
        "meta": dict(meta or {}),
    }
    body = _canonical_json(manifest)
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(body)), body]
    for a in arrays:
        raw = a.tobytes(order="C")
        parts += [struct.pack("<Q", len(raw)), raw]
    return b"".join(parts)


def loads_checkpoint(data: bytes) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", data, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (mlen,) = struct.unpack_from("<Q", data, 12)
    pos = 20
    manifest = json.loads(data[pos : pos + mlen].decode("utf-8"))
    pos += mlen
    tensors: dict[str, np.ndarray] = {}
    for sec in manifest["sections"]:
        (n,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        shape = tuple(sec["shape"])
        if n != 8 * int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"section {sec['name']!r}: {n} bytes does not match shape {shape}")
        tensors[sec["name"]] = np.frombuffer(data, dtype="<f8", count=n // 8, offset=pos).reshape(shape).astype(np.float64)
        pos += n
    if pos != len(data):
        raise CheckpointError("trailing bytes after the last section")
    return tensors, manifest["meta"]


def save_checkpoint(path, tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> None:
    Path(path).write_bytes(dumps_checkpoint(tensors, meta))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    return loads_checkpoint(Path(path).read_bytes())


def optimizer_tensors(prefix: str, opt: Adam) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    st = opt.state
    tensors = {}
    for i, (m, v) in enumerate(zip(st.first_moment, st.second_moment)):
        tensors[f"{prefix}.m.{i:04d}"] = m
        tensors[f"{prefix}.v.{i:04d}"] = v
    meta = {"lr": st.lr, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps, "step": st.step, "n": len(st.first_moment)}
    return tensors, meta


def restore_optimizer(opt: Adam, prefix: str, tensors: Mapping[str, np.ndarray], meta: Mapping[str, Any]) -> None:
    st = opt.state
    st.lr, st.beta1, st.beta2, st.eps, st.step = meta["lr"], meta["beta1"], meta["beta2"], meta["eps"], meta["step"]
    st.first_moment = [tensors[f"{prefix}.m.{i:04d}"].copy() for i in range(meta["n"])]
    st.second_moment = [tensors[f"{prefix}.v.{i:04d}"].copy() for i in range(meta["n"])]
