from __future__ import annotations

import numpy as np
import pytest

from mfld import (
    ActivationStore,
    BadMagic,
    LayerRecord,
    ManifestMismatch,
    Truncated,
    read_csv_store,
    read_store,
    write_store,
)
from mfld.errors import MfldError
from mfld.store import ExampleRecord, MAGIC


def _stores_equal(a: ActivationStore, b: ActivationStore) -> bool:
    if [l.name for l in a.layers] != [l.name for l in b.layers]:
        return False
    for la, lb in zip(a.layers, b.layers):
        if la.dtype != lb.dtype or la.shape != lb.shape:
            return False
        if la.data.tobytes() != lb.data.tobytes():
            return False
    if len(a.manifest) != len(b.manifest):
        return False
    for ea, eb in zip(a.manifest, b.manifest):
        if (ea.id, ea.labels, ea.center_frame) != (eb.id, eb.labels, eb.center_frame):
            return False
    return True


def test_round_trip_bit_exact(tiny_store, tmp_path):
    write_store(tiny_store, tmp_path / "store")
    again = read_store(tmp_path / "store")
    assert _stores_equal(tiny_store, again)
    # and writing the re-read store produces identical bytes on disk
    write_store(again, tmp_path / "store2")
    for name in ("layer_00000.bin", "layer_00001.bin", "manifest.json"):
        assert (tmp_path / "store" / name).read_bytes() == (tmp_path / "store2" / name).read_bytes()


def test_layer_file_size_f64(tmp_path):
    data = np.arange(1.0, 7.0).reshape(2, 1, 3)
    store = ActivationStore(
        layers=[LayerRecord("only", "f64", data)],
        manifest=[ExampleRecord(id=str(i), labels={"k": "v"}) for i in range(2)],
    )
    write_store(store, tmp_path / "s")
    size = (tmp_path / "s" / "layer_00000.bin").stat().st_size
    assert size == 8 + 1 + 24 + 48
    again = read_store(tmp_path / "s")
    assert _stores_equal(store, again)


def test_layer_file_size_f32(tmp_path):
    rng = np.random.default_rng(1)
    data = rng.standard_normal((50, 100, 8)).astype(np.float32)
    store = ActivationStore(
        layers=[LayerRecord("big", "f32", data)],
        manifest=[ExampleRecord(id=str(i), labels={"k": "v"}) for i in range(50)],
    )
    write_store(store, tmp_path / "s")
    size = (tmp_path / "s" / "layer_00000.bin").stat().st_size
    # header (8 + 1 + 24) plus examples*timesteps*features*4 payload
    assert size == 33 + 50 * 100 * 8 * 4


def test_manifest_mismatch_refused(tmp_path):
    data = np.zeros((3, 1, 2))
    store = ActivationStore(
        layers=[LayerRecord("l", "f64", data)],
        manifest=[ExampleRecord(id="0", labels={"k": "v"})],  # 1 example vs 3 rows
    )
    with pytest.raises(ManifestMismatch):
        write_store(store, tmp_path / "s")


def test_duplicate_ids_refused(tmp_path):
    data = np.zeros((2, 1, 2))
    store = ActivationStore(
        layers=[LayerRecord("l", "f64", data)],
        manifest=[ExampleRecord(id="same", labels={}), ExampleRecord(id="same", labels={})],
    )
    with pytest.raises(ManifestMismatch):
        write_store(store, tmp_path / "s")


def test_bad_magic(tiny_store, tmp_path):
    write_store(tiny_store, tmp_path / "s")
    target = tmp_path / "s" / "layer_00000.bin"
    raw = bytearray(target.read_bytes())
    raw[:8] = b"XXXXXXX0"
    target.write_bytes(bytes(raw))
    with pytest.raises(BadMagic):
        read_store(tmp_path / "s")


def test_truncated_payload(tiny_store, tmp_path):
    write_store(tiny_store, tmp_path / "s")
    target = tmp_path / "s" / "layer_00001.bin"
    raw = target.read_bytes()
    target.write_bytes(raw[:-5])
    with pytest.raises(Truncated):
        read_store(tmp_path / "s")


def test_zero_shape_refused():
    with pytest.raises(MfldError):
        LayerRecord("l", "f64", np.zeros((2, 0, 3)))


def test_magic_constant():
    assert MAGIC == b"MFLDSTR1"


def test_csv_import(tmp_path):
    path = tmp_path / "fix.csv"
    path.write_text("label,f0,f1\na,1.0,2.0\nb,3.0,4.0\na,5.0,6.0\n")
    store = read_csv_store(path)
    assert len(store.manifest) == 3
    assert store.layers[0].shape == (3, 1, 2)
    assert store.manifest[0].labels == {"label": "a"}
    np.testing.assert_array_equal(store.layers[0].data[1, 0], [3.0, 4.0])


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("first,f0\nx,1.0\n")
    with pytest.raises(MfldError):
        read_csv_store(path)
