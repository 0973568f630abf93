from __future__ import annotations

import numpy as np
import pytest

from mfld import ManifoldSet, TooFewManifolds, assemble_manifolds, permute_labels, random_project
from mfld.errors import MfldError
from mfld.store import ActivationStore, ExampleRecord, LayerRecord

from conftest import random_mset


def test_assemble_groups_by_label(tiny_store):
    mset = assemble_manifolds(tiny_store, "word", "conv1", "flatten-all")
    assert mset.labels == ["cat", "cow", "dog"]
    assert mset.sizes == [2, 2, 2]
    assert mset.feature_dim == 2 * 3  # flatten-all concatenates timesteps


def test_assemble_rows_are_reindexed_store_rows(tiny_store):
    mset = assemble_manifolds(tiny_store, "speaker", "conv1", "flatten-all")
    flat = tiny_store.layers[0].data.reshape(6, 6)
    pooled = mset.pooled()
    # every output row is literally one input row (no arithmetic)
    for row in pooled:
        assert any(np.array_equal(row, r) for r in flat)
    assert pooled.shape[0] == 6


def test_assemble_single_index_and_center(tiny_store):
    m_idx = assemble_manifolds(tiny_store, "word", "conv1", 1)
    assert m_idx.feature_dim == 3
    m_center = assemble_manifolds(tiny_store, "word", "conv1", "center")
    # 2 timesteps -> center frame is floor(2/2) = 1
    np.testing.assert_array_equal(m_center.pooled(), m_idx.pooled())
    with pytest.raises(MfldError):
        assemble_manifolds(tiny_store, "word", "conv1", 5)


def test_assemble_paper_scale_flatten():
    # 50 word labels x 20 examples, 800 features x 10 steps -> P=50, M=20, N=8000
    rng = np.random.default_rng(12)
    data = rng.standard_normal((1000, 10, 800)).astype(np.float32)
    store = ActivationStore(
        layers=[LayerRecord("gru", "f32", data)],
        manifest=[ExampleRecord(id=str(i), labels={"word": f"w{i % 50:02d}"})
                  for i in range(1000)],
    )
    mset = assemble_manifolds(store, "word", "gru", "flatten-all")
    assert mset.n_manifolds == 50
    assert mset.sizes == [20] * 50
    assert mset.feature_dim == 8000


def test_assemble_single_label_errors():
    store = ActivationStore(
        layers=[LayerRecord("l", "f64", np.zeros((2, 1, 2)))],
        manifest=[ExampleRecord(id=str(i), labels={"k": "only"}) for i in range(2)],
    )
    with pytest.raises(TooFewManifolds):
        assemble_manifolds(store, "k", "l", "flatten-all")


def test_assemble_missing_key_warns(tiny_store):
    tiny_store.manifest[0].labels.pop("speaker")
    with pytest.warns(UserWarning):
        mset = assemble_manifolds(tiny_store, "speaker", "conv1", "flatten-all")
    assert sum(mset.sizes) == 5


def test_projection_columns_unit_norm():
    rng = np.random.default_rng(2)
    mset = random_mset(rng, p=3, m=4, n=80)
    from mfld.manifolds import projection_matrix

    proj = projection_matrix(80, 50, seed=9)
    np.testing.assert_allclose(np.linalg.norm(proj, axis=0), 1.0, atol=1e-12)
    out = random_project(mset, 50, seed=9)
    assert out.feature_dim == 50
    np.testing.assert_allclose(out.matrices[0], mset.matrices[0] @ proj)


def test_projection_deterministic():
    rng = np.random.default_rng(3)
    mset = random_mset(rng)
    a = random_project(mset, 12, seed=4)
    b = random_project(mset, 12, seed=4)
    for ma, mb in zip(a.matrices, b.matrices):
        assert ma.tobytes() == mb.tobytes()


def test_projection_commutes_with_row_permutation():
    rng = np.random.default_rng(4)
    mset = random_mset(rng, p=3, m=6, n=40)
    perm = rng.permutation(6)
    permuted_rows = mset.replace([m[perm] for m in mset.matrices])
    a = random_project(permuted_rows, 10, seed=11)
    b = random_project(mset, 10, seed=11)
    for ma, mb in zip(a.matrices, b.matrices):
        # same projection matrix either way; BLAS row batching may round differently
        np.testing.assert_allclose(ma, mb[perm], rtol=1e-12, atol=1e-14)


def test_orthonormalize_option():
    rng = np.random.default_rng(5)
    mset = random_mset(rng, n=30)
    out = random_project(mset, 30, seed=1, orthonormalize=True)
    # orthonormal square projection preserves distances
    d0 = np.linalg.norm(mset.matrices[0][0] - mset.matrices[1][0])
    d1 = np.linalg.norm(out.matrices[0][0] - out.matrices[1][0])
    assert abs(d0 - d1) < 1e-9


def test_permute_preserves_multiset_and_profile():
    rng = np.random.default_rng(6)
    mset = ManifoldSet(
        labels=["a", "b", "c"],
        matrices=[rng.standard_normal((m, 7)) for m in (3, 5, 2)],
    )
    out = permute_labels(mset, seed=13)
    assert out.sizes == [3, 5, 2]
    before = np.sort(mset.pooled().view([("", float)] * 7), axis=0)
    after = np.sort(out.pooled().view([("", float)] * 7), axis=0)
    assert np.array_equal(before, after)


def test_permute_deterministic():
    rng = np.random.default_rng(7)
    mset = random_mset(rng)
    a = permute_labels(mset, seed=21)
    b = permute_labels(mset, seed=21)
    for ma, mb in zip(a.matrices, b.matrices):
        assert ma.tobytes() == mb.tobytes()


def test_manifold_set_invariants():
    with pytest.raises(TooFewManifolds):
        ManifoldSet(labels=["x"], matrices=[np.zeros((2, 3))])
    with pytest.raises(MfldError):
        ManifoldSet(labels=["x", "y"], matrices=[np.zeros((2, 3)), np.zeros((2, 4))])
    bad = np.zeros((2, 3))
    bad[0, 0] = np.nan
    with pytest.raises(MfldError):
        ManifoldSet(labels=["x", "y"], matrices=[bad, np.zeros((2, 3))])
