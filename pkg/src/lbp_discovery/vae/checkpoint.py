"""Binary model checkpoints.

Layout: magic ``b"LBPVAE\\0"``, uint32 format version, uint32 length of a
UTF-8 JSON header, the header (config plus per-parameter shapes in declared
order), then each parameter as little-endian float32 in that order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .model import VaeConfig, VaeModel, param_names

MAGIC = b"LBPVAE\0"
VERSION = 1

__all__ = ["MAGIC", "VERSION", "CheckpointError", "save", "load"]


class CheckpointError(ValueError):
    pass


def save(model: VaeModel, path) -> None:
    names = param_names(model.cfg)
    header = {
        "config": asdict(model.cfg),
        "params": [[n, list(model.params[n].shape)] for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(Path(path), "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(model.params[n], dtype="<f4").tobytes())


def load(path) -> VaeModel:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a model checkpoint")
    off = len(MAGIC)
    try:
        version, size = struct.unpack_from("<II", data, off)
    except struct.error:
        raise CheckpointError(f"{path}: truncated header") from None
    if version != VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {VERSION}")
    off += 8
    header = json.loads(data[off : off + size])
    off += size
    cfg = VaeConfig(**header["config"])
    declared = [n for n, _ in header["params"]]
    if declared != param_names(cfg):
        raise CheckpointError(f"{path}: parameter list does not match the configuration")
    params = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape))
        end = off + 4 * count
        if end > len(data):
            raise CheckpointError(f"{path}: truncated at parameter {name}")
        params[name] = np.frombuffer(data[off:end], dtype="<f4").astype(np.float64).reshape(shape)
        off = end
    if off != len(data):
        raise CheckpointError(f"{path}: {len(data) - off} trailing bytes")
    return VaeModel(cfg, params)
