from __future__ import annotations

import numpy as np
import pytest

from mfld import (
    ManifoldSet,
    classifier_probe,
    eigenspectrum,
    explained_variance_dim,
    participation_ratio,
)
from mfld.dims import spectrum_metrics
from mfld.errors import MfldError

from conftest import random_mset, random_orthogonal


def test_eigenspectrum_hand_case():
    rows = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]])
    eig = eigenspectrum(rows)
    # (n-1)-normalized covariance: variances 2/3 and 8/3, descending
    np.testing.assert_allclose(eig, [8.0 / 3.0, 2.0 / 3.0], atol=1e-12)
    assert eig[0] >= eig[1]


def test_eigenspectrum_identical_rows_zero():
    rows = np.tile([1.0, 2.0, 3.0], (5, 1))
    np.testing.assert_allclose(eigenspectrum(rows), 0.0, atol=1e-12)


def test_eigenspectrum_rotation_invariant():
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((20, 10))
    q = random_orthogonal(rng, 10)
    a, b = eigenspectrum(rows), eigenspectrum(rows @ q)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_participation_ratio_values():
    assert participation_ratio([1.0, 1.0, 1.0, 1.0]) == pytest.approx(4.0)
    assert participation_ratio([3.0, 1.0]) == pytest.approx(1.6, abs=1e-12)
    assert participation_ratio([1.0, 0.0, 0.0]) == pytest.approx(1.0)
    with pytest.raises(MfldError):
        participation_ratio([0.0, 0.0])


def test_participation_ratio_bounds():
    rng = np.random.default_rng(1)
    lam = rng.random(12)
    pr = participation_ratio(lam)
    assert 1.0 <= pr <= np.count_nonzero(lam) + 1e-12
    # equality iff all positive eigenvalues equal
    assert participation_ratio([2.0] * 7) == pytest.approx(7.0)


def test_explained_variance_dim_values():
    assert explained_variance_dim([0.8, 0.15, 0.05], 0.9) == 2
    assert explained_variance_dim([5.0], 0.9) == 1
    assert explained_variance_dim([0.5, 0.3, 0.2, 0.0], 1.0) == 3


def test_dimension_measures_bounded_by_rank():
    rng = np.random.default_rng(2)
    rows = rng.standard_normal((8, 50))  # rank 7 after centering
    m = spectrum_metrics(rows)
    bound = min(rows.shape[0], rows.shape[1])
    assert m.participation_ratio <= bound
    assert m.explained_variance_dim <= bound
    assert m.explained_variance_dim <= 7


def test_metrics_invariant_under_scaling_and_rotation():
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((30, 12))
    q = random_orthogonal(rng, 12)
    base = spectrum_metrics(rows)
    scaled = spectrum_metrics(4.2 * rows)
    rotated = spectrum_metrics(rows @ q)
    assert base.explained_variance_dim == scaled.explained_variance_dim == rotated.explained_variance_dim
    assert base.participation_ratio == pytest.approx(scaled.participation_ratio, rel=1e-9)
    assert base.participation_ratio == pytest.approx(rotated.participation_ratio, rel=1e-9)


# ------------------------------------------------------------------- probe

def _clustered_mset(rng, p=4, m=12, n=20, spread=0.02):
    centers = 2.0 * np.eye(p, n)
    mats = [centers[i] + spread * rng.standard_normal((m, n)) for i in range(p)]
    return ManifoldSet(labels=[str(i) for i in range(p)], matrices=mats)


def test_probe_separated_clusters():
    rng = np.random.default_rng(4)
    mset = _clustered_mset(rng)
    res = classifier_probe(mset, seed=5)
    assert res.mean >= 0.99
    assert res.n_splits == 10
    assert np.all((0 <= res.accuracies) & (res.accuracies <= 1))


def test_probe_permuted_labels_chance():
    rng = np.random.default_rng(6)
    mset = _clustered_mset(rng, p=5, m=20)
    from mfld import permute_labels

    permuted = permute_labels(mset, seed=7)
    res = classifier_probe(permuted, seed=8)
    chance = 1.0 / 5.0
    assert abs(res.mean - chance) <= max(3 * res.stderr, 0.12)


def test_probe_excludes_tiny_classes():
    rng = np.random.default_rng(9)
    mats = [rng.standard_normal((1, 6)), rng.standard_normal((8, 6)) + 3,
            rng.standard_normal((8, 6)) - 3]
    mset = ManifoldSet(labels=["tiny", "a", "b"], matrices=mats)
    with pytest.warns(UserWarning):
        res = classifier_probe(mset, seed=10)
    assert res.excluded_labels == ["tiny"]


def test_probe_deterministic():
    rng = np.random.default_rng(11)
    mset = _clustered_mset(rng, spread=0.5)
    a = classifier_probe(mset, seed=12)
    b = classifier_probe(mset, seed=12)
    np.testing.assert_array_equal(a.accuracies, b.accuracies)
