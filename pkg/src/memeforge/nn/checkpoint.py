"""Self-describing binary checkpoint format.

Layout: magic, format version, model kind, JSON-encoded config, then each
parameter tensor in declaration order as (name, shape, little-endian float64
payload)."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import CorruptCheckpoint
from .models import FusionModelConfig

MAGIC = b"MEMEFORGE-CKPT"
VERSION = 1


def save_checkpoint(path, kind: str, cfg: FusionModelConfig,
                    params: dict[str, np.ndarray]) -> None:
    header = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
    kind_b = kind.encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<I", len(kind_b)))
        f.write(kind_b)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(struct.pack("<I", len(params)))
        for name, tensor in params.items():
            name_b = name.encode("utf-8")
            f.write(struct.pack("<I", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<I", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}Q", *tensor.shape))
            f.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CorruptCheckpoint(f"truncated file: wanted {n} bytes, got {len(data)}")
    return data


def load_checkpoint(path, expected_kind: str | None = None):
    """Read a checkpoint; returns (kind, config, params)."""
    with open(path, "rb") as f:
        if _read_exact(f, len(MAGIC)) != MAGIC:
            raise CorruptCheckpoint("bad magic")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != VERSION:
            raise CorruptCheckpoint(f"unsupported version {version}")
        (kind_len,) = struct.unpack("<I", _read_exact(f, 4))
        kind = _read_exact(f, kind_len).decode("utf-8")
        if expected_kind is not None and kind != expected_kind:
            raise CorruptCheckpoint(
                f"kind mismatch: checkpoint holds {kind!r}, expected {expected_kind!r}")
        (hdr_len,) = struct.unpack("<I", _read_exact(f, 4))
        try:
            cfg = FusionModelConfig.from_dict(json.loads(_read_exact(f, hdr_len)))
        except (ValueError, TypeError) as exc:
            raise CorruptCheckpoint(f"bad config header: {exc}") from exc
        (n_params,) = struct.unpack("<I", _read_exact(f, 4))
        params: dict[str, np.ndarray] = {}
        for _ in range(n_params):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4))
            name = _read_exact(f, name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", _read_exact(f, 4))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim))
            count = int(np.prod(shape)) if ndim else 1
            raw = _read_exact(f, 8 * count)
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        trailing = f.read(1)
        if trailing:
            raise CorruptCheckpoint("trailing bytes after last tensor")
    return kind, cfg, params
