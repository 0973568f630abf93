"""On-disk activation store: one binary tensor file per layer plus a JSON manifest.

Layer file layout (little endian):
    magic ``MFLDSTR1`` (8 bytes) | dtype code u8 (0=f32, 1=f64) |
    examples u64 | timesteps u64 | features u64 | row-major payload
    (example-major, then timestep, then feature).

Manifest (``manifest.json``):
    {"version": 1,
     "examples": [{"id": ..., "labels": {key: value}, "center_frame": int?}],
     "layers": [names in on-disk order]}
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagic, ManifestMismatch, MfldError, Truncated

MAGIC = b"MFLDSTR1"
MANIFEST_NAME = "manifest.json"
_DTYPE_CODES = {"f32": 0, "f64": 1}
_CODE_DTYPES = {0: "f32", 1: "f64"}
_NP_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_HEADER = struct.Struct("<8sBQQQ")


@dataclass
class LayerRecord:
    """One dense activation tensor of shape (examples, timesteps, features)."""

    name: str
    dtype: str
    data: np.ndarray

    def __post_init__(self):
        if self.dtype not in _DTYPE_CODES:
            raise MfldError(f"unknown dtype {self.dtype!r} (expected f32 or f64)")
        self.data = np.ascontiguousarray(self.data, dtype=_NP_DTYPES[self.dtype])
        if self.data.ndim != 3:
            raise MfldError(f"layer {self.name!r}: tensor must be 3-d, got {self.data.ndim}-d")
        if min(self.data.shape) < 1:
            raise MfldError(f"layer {self.name!r}: shape {self.data.shape} has a zero axis")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass
class ExampleRecord:
    """Manifest entry for one example."""

    id: str
    labels: dict[str, str]
    center_frame: int | None = None


@dataclass
class ActivationStore:
    """In-memory activation store: layers plus the per-example label manifest."""

    layers: list[LayerRecord]
    manifest: list[ExampleRecord] = field(default_factory=list)

    def validate(self):
        if not self.layers:
            raise MfldError("store has no layers")
        if not self.manifest:
            raise ManifestMismatch("store has an empty manifest")
        ids = [ex.id for ex in self.manifest]
        if len(set(ids)) != len(ids):
            raise ManifestMismatch("duplicate example ids in manifest")
        n = len(self.manifest)
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise MfldError("duplicate layer names")
        for layer in self.layers:
            if layer.shape[0] != n:
                raise ManifestMismatch(
                    f"layer {layer.name!r} holds {layer.shape[0]} examples, manifest has {n}"
                )

    def layer(self, name: str) -> LayerRecord:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise MfldError(f"no layer named {name!r}")

    def label_values(self, key: str) -> list[str]:
        return sorted({ex.labels[key] for ex in self.manifest if key in ex.labels})


def _layer_filename(index: int) -> str:
    return f"layer_{index:05d}.bin"


def write_store(store: ActivationStore, path: str | Path) -> None:
    """Write a validated store to a directory; re-reading is bit-identical."""
    store.validate()
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, layer in enumerate(store.layers):
        header = _HEADER.pack(MAGIC, _DTYPE_CODES[layer.dtype], *layer.shape)
        with open(path / _layer_filename(i), "wb") as fh:
            fh.write(header)
            fh.write(layer.data.tobytes(order="C"))
    manifest = {
        "version": 1,
        "examples": [
            {"id": ex.id, "labels": ex.labels}
            | ({"center_frame": ex.center_frame} if ex.center_frame is not None else {})
            for ex in store.manifest
        ],
        "layers": [layer.name for layer in store.layers],
    }
    with open(path / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def _read_layer_file(path: Path, name: str) -> LayerRecord:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise Truncated(f"{path}: shorter than the fixed header")
    magic, code, examples, timesteps, features = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if code not in _CODE_DTYPES:
        raise MfldError(f"{path}: unknown dtype code {code}")
    dtype = _CODE_DTYPES[code]
    count = examples * timesteps * features
    expected = _HEADER.size + count * _NP_DTYPES[dtype].itemsize
    if len(raw) < expected:
        raise Truncated(f"{path}: payload is {len(raw) - _HEADER.size} bytes, header implies {expected - _HEADER.size}")
    if len(raw) > expected:
        raise MfldError(f"{path}: {len(raw) - expected} trailing bytes after payload")
    data = np.frombuffer(raw, dtype=_NP_DTYPES[dtype], count=count, offset=_HEADER.size)
    return LayerRecord(name=name, dtype=dtype, data=data.reshape(examples, timesteps, features).copy())


def read_store(path: str | Path) -> ActivationStore:
    """Read a store directory, rejecting corrupted headers and manifests."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise MfldError(f"{path}: no {MANIFEST_NAME}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("version") != 1:
        raise MfldError(f"{path}: unsupported manifest version {manifest.get('version')!r}")
    examples = [
        ExampleRecord(id=str(e["id"]), labels={str(k): str(v) for k, v in e["labels"].items()},
                      center_frame=e.get("center_frame"))
        for e in manifest["examples"]
    ]
    layers = [
        _read_layer_file(path / _layer_filename(i), name)
        for i, name in enumerate(manifest["layers"])
    ]
    store = ActivationStore(layers=layers, manifest=examples)
    store.validate()
    return store


def read_csv_store(path: str | Path, layer_name: str = "features") -> ActivationStore:
    """Import a ``label,f0,f1,...`` CSV as a single-layer, single-timestep store."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "label":
            raise MfldError(f"{path}: expected header starting with 'label'")
        n_features = len(header) - 1
        if n_features < 1:
            raise MfldError(f"{path}: no feature columns")
        labels, rows = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n_features + 1:
                raise MfldError(f"{path}:{line}: expected {n_features + 1} columns, got {len(row)}")
            labels.append(row[0])
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise MfldError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)[:, None, :]
    manifest = [
        ExampleRecord(id=f"ex{i:05d}", labels={"label": lab}) for i, lab in enumerate(labels)
    ]
    store = ActivationStore(layers=[LayerRecord(layer_name, "f64", data)], manifest=manifest)
    store.validate()
    return store
