"""Versioned single-file checkpoints.

Layout::

    b"HOIMCKPT"                 8-byte magic
    uint64 little-endian        header length in bytes
    header                      UTF-8 JSON (format, version, config, meta, arrays, payload_sha256)
    payload                     raw little-endian arrays, in header order

Each array entry records ``name``, ``shape``, ``dtype`` ("<f4" or "<f8"),
``offset`` and ``nbytes`` within the payload. Nothing time-dependent is
stored, so identical parameters give identical files.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .model import ModelConfig, ModelParams

MAGIC = b"HOIMCKPT"
FORMAT = "hoimotion-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: ModelParams, meta: dict | None = None) -> None:
    arrays, chunks, offset = [], [], 0
    for name, p in params.named_parameters():
        data = np.ascontiguousarray(p.data, dtype=p.data.dtype.newbyteorder("<"))
        raw = data.tobytes()
        arrays.append({"name": name, "shape": list(data.shape), "dtype": data.dtype.str,
                       "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "format": FORMAT,
        "version": VERSION,
        "config": params.config.to_dict(),
        "meta": meta or {},
        "arrays": arrays,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = MAGIC + struct.pack("<Q", len(head)) + head + payload

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_header(path) -> tuple[dict, bytes]:
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    (n,) = struct.unpack("<Q", blob[8:16])
    if 16 + n > len(blob):
        raise CheckpointError(f"{path}: truncated header (needs {n} bytes)")
    try:
        header = json.loads(blob[16:16 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from None
    if header.get("format") != FORMAT:
        raise CheckpointError(f"{path}: field 'format' is {header.get('format')!r}, expected {FORMAT!r}")
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: field 'version' is {header.get('version')!r}, expected {VERSION}")
    return header, blob[16 + n:]


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Return ``(params, meta)``; raises :class:`CheckpointError` without side effects."""
    header, payload = read_header(path)
    if hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise CheckpointError(f"{path}: field 'payload_sha256' does not match the payload (truncated or corrupt)")
    try:
        config = ModelConfig.from_dict(header["config"])
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: field 'config' is invalid: {e}") from None

    params = ModelParams.init(config, 0)
    expected = dict(params.named_parameters())
    entries = {e["name"]: e for e in header.get("arrays", [])}
    if set(entries) != set(expected):
        missing = sorted(set(expected) - set(entries))
        extra = sorted(set(entries) - set(expected))
        raise CheckpointError(f"{path}: field 'arrays' mismatch, missing={missing[:5]} extra={extra[:5]}")

    loaded = {}
    for name, tensor in expected.items():
        e = entries[name]
        dtype = np.dtype(e["dtype"])
        shape = tuple(e["shape"])
        if shape != tensor.shape:
            raise CheckpointError(f"{path}: array {name!r} has shape {shape}, config implies {tensor.shape}")
        if dtype.kind != "f" or e["nbytes"] != dtype.itemsize * int(np.prod(shape)):
            raise CheckpointError(f"{path}: array {name!r} has inconsistent dtype/nbytes")
        start, stop = e["offset"], e["offset"] + e["nbytes"]
        if stop > len(payload):
            raise CheckpointError(f"{path}: array {name!r} runs past the payload")
        loaded[name] = np.frombuffer(payload[start:stop], dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
    for name, tensor in expected.items():
        tensor.data = loaded[name]
    return params, header.get("meta", {})
