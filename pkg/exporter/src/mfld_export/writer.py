"""Byte-exact emitter for the activation-store on-disk format.

Layer file: magic ``MFLDSTR1`` | dtype u8 (0=f32, 1=f64) | examples u64 LE |
timesteps u64 LE | features u64 LE | row-major payload. Manifest:
``manifest.json`` with {version, examples, layers}.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MFLDSTR1"
MANIFEST_NAME = "manifest.json"
_HEADER = struct.Struct("<8sBQQQ")
_DTYPES = {"f32": (0, np.dtype("<f4")), "f64": (1, np.dtype("<f8"))}


def layer_filename(index: int) -> str:
    return f"layer_{index:05d}.bin"


def write_layer_file(path: Path, data: np.ndarray, dtype: str) -> None:
    """Write one (examples, timesteps, features) tensor."""
    code, np_dtype = _DTYPES[dtype]
    data = np.ascontiguousarray(data, dtype=np_dtype)
    if data.ndim != 3 or min(data.shape) < 1:
        raise ValueError(f"layer tensor must be 3-d with positive axes, got {data.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, code, *data.shape))
        fh.write(data.tobytes(order="C"))


def write_manifest(path: Path, examples: list[dict], layer_names: list[str]) -> None:
    manifest = {
        "version": 1,
        "examples": [
            {"id": ex["id"], "labels": ex["labels"]}
            | ({"center_frame": ex["center_frame"]} if ex.get("center_frame") is not None else {})
            for ex in examples
        ],
        "layers": layer_names,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def write_store(out_dir: Path, layers: list[tuple[str, np.ndarray]], dtype: str,
                examples: list[dict]) -> Path:
    """Write a full store directory: one binary file per layer plus the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, (_, data) in enumerate(layers):
        write_layer_file(out_dir / layer_filename(i), data, dtype)
    write_manifest(out_dir / MANIFEST_NAME, examples, [name for name, _ in layers])
    return out_dir
