from __future__ import annotations

import numpy as np
import pytest

from mfld import SynthSpec, make_ball_manifolds, make_gaussian_clouds, read_store, write_store
from mfld.errors import MfldError
from mfld.geometry import compute_centers, subtract_global_mean
from mfld.synth import to_store


def test_ball_points_at_exact_radius():
    spec = SynthSpec(family="ball", n_manifolds=3, n_points=40, n_features=200,
                     intrinsic_dim=6, radius=0.7, seed=0)
    mset = make_ball_manifolds(spec)
    centers = mset.provenance["planted_centers"]
    for center, m in zip(centers, mset.matrices):
        dist = np.linalg.norm(m - center, axis=1)
        # distance to center is exactly R * |center| with |center| = 1
        np.testing.assert_allclose(dist, 0.7, atol=1e-12)
    assert mset.feature_dim == 200


def test_ball_pairwise_distances_bounded():
    spec = SynthSpec(family="ball", n_manifolds=2, n_points=30, n_features=100,
                     intrinsic_dim=4, radius=1.3, seed=1)
    mset = make_ball_manifolds(spec)
    for m in mset.matrices:
        d = np.linalg.norm(m[:, None, :] - m[None, :, :], axis=-1)
        assert d.max() <= 2 * 1.3 + 1e-9


def test_solid_ball_points_inside():
    spec = SynthSpec(family="ball", n_manifolds=2, n_points=50, n_features=60,
                     intrinsic_dim=5, radius=1.0, seed=2, solid=True)
    mset = make_ball_manifolds(spec)
    centers = mset.provenance["planted_centers"]
    for center, m in zip(centers, mset.matrices):
        dist = np.linalg.norm(m - center, axis=1)
        assert np.all(dist <= 1.0 + 1e-12)
        assert dist.min() < 0.95  # genuinely interior points


def test_gaussian_cloud_radius_scaling():
    spec = SynthSpec(family="gaussian-cloud", n_manifolds=4, n_points=200,
                     n_features=2000, radius=0.5, seed=3)
    mset = make_gaussian_clouds(spec)
    for m in mset.matrices:
        c = m.mean(axis=0)
        rel = np.linalg.norm(m - c, axis=1).mean()
        assert rel == pytest.approx(0.5, rel=0.1)


def test_planted_center_correlation():
    for rho in (0.0, 0.5):
        spec = SynthSpec(family="correlated-centers", n_manifolds=50, n_points=2,
                         n_features=1500, radius=0.1, center_corr=rho, seed=4)
        mset = make_gaussian_clouds(spec)
        stats = compute_centers(mset)
        assert stats.rho_center == pytest.approx(rho, abs=0.05)


def test_generator_deterministic():
    spec = SynthSpec(family="ball", n_manifolds=3, n_points=10, n_features=50,
                     intrinsic_dim=3, radius=1.0, seed=5)
    a, b = make_ball_manifolds(spec), make_ball_manifolds(spec)
    for ma, mb in zip(a.matrices, b.matrices):
        assert ma.tobytes() == mb.tobytes()


def test_parameter_validation():
    with pytest.raises(MfldError):
        SynthSpec(family="ball", n_manifolds=1, n_points=5, n_features=10,
                  intrinsic_dim=2).validate()
    with pytest.raises(MfldError):
        SynthSpec(family="ball", n_manifolds=3, n_points=5, n_features=10,
                  intrinsic_dim=9).validate()
    with pytest.raises(MfldError):
        SynthSpec(family="nope", n_manifolds=3, n_points=5, n_features=10).validate()
    with pytest.raises(MfldError):
        SynthSpec(family="gaussian-cloud", n_manifolds=3, n_points=5,
                  n_features=10, center_corr=1.0).validate()


def test_to_store_round_trip(tmp_path):
    spec = SynthSpec(family="gaussian-cloud", n_manifolds=3, n_points=4,
                     n_features=8, radius=0.3, seed=6)
    mset = make_gaussian_clouds(spec)
    store = to_store(mset)
    write_store(store, tmp_path / "s")
    again = read_store(tmp_path / "s")
    assert again.layers[0].shape == (12, 1, 8)
    assert again.label_values("label") == mset.labels
