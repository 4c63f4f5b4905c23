"""Versioned binary model checkpoints.

Layout: magic, format version, header length, JSON header (architecture,
transform configuration, seed, parameter manifest, payload checksum), then the
parameter blocks as little-endian float64 in declared order.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import ChecksumError, TruncatedFileError, VersionError
from ..spectral import StftConfig
from .model import CUNet, CUNetConfig

MAGIC = b"CUNC"
FORMAT_VERSION = 1


def save_checkpoint(path, model: CUNet, stft_cfg: StftConfig, fs: float,
                    extra: dict | None = None) -> None:
    params = model.parameters()
    payload = b"".join(p.data.astype("<f8").tobytes() for _, p in params)
    header = {
        "model": asdict(model.cfg),
        "stft": asdict(stft_cfg),
        "fs": fs,
        "params": [{"name": name, "shape": list(p.data.shape)} for name, p in params],
        "payload_crc32": zlib.crc32(payload) & 0xFFFFFFFF,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        f.write(blob)
        f.write(payload)


def load_checkpoint(path):
    """Returns (model, stft_cfg, fs, extra)."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise VersionError(f"{path}: not a model checkpoint")
    version, header_len = struct.unpack("<II", raw[4:12])
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if len(raw) < 12 + header_len:
        raise TruncatedFileError(f"{path}: truncated header")
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    payload = raw[12 + header_len :]
    expected = sum(int(np.prod(p["shape"])) for p in header["params"]) * 8
    if len(payload) < expected:
        raise TruncatedFileError(f"{path}: payload {len(payload)} < {expected} bytes")
    payload = payload[:expected]
    if (zlib.crc32(payload) & 0xFFFFFFFF) != header["payload_crc32"]:
        raise ChecksumError(f"{path}: payload checksum mismatch")

    model_cfg = dict(header["model"])
    model_cfg["channels"] = tuple(model_cfg["channels"])
    model = CUNet(CUNetConfig(**model_cfg))
    state = []
    offset = 0
    for p in header["params"]:
        count = int(np.prod(p["shape"]))
        block = np.frombuffer(payload, dtype="<f8", count=count, offset=offset * 8)
        state.append((p["name"], block.reshape(p["shape"])))
        offset += count
    model.set_state(state)
    stft_cfg = StftConfig(**header["stft"])
    return model, stft_cfg, float(header["fs"]), header.get("extra", {})
