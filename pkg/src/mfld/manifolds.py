"""Labeled manifold sets: assembly from stores, random projection, label permutation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MfldError, TooFewManifolds
from .store import ActivationStore

# timestep selectors accepted by assemble_manifolds (besides an explicit index)
FLATTEN_ALL = "flatten-all"
CENTER = "center"


@dataclass
class ManifoldSet:
    """P labeled manifolds, each an (M_mu x N) float64 matrix of feature rows.

    Matrices are frozen (read-only) after construction; all operations return
    new sets, so values are safe to share across parallel workers.
    """

    labels: list[str]
    matrices: list[np.ndarray]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels) != len(self.matrices):
            raise MfldError("labels and matrices differ in length")
        if len(self.matrices) < 2:
            raise TooFewManifolds(f"need at least 2 manifolds, got {len(self.matrices)}")
        mats = []
        for lab, m in zip(self.labels, self.matrices):
            m = np.ascontiguousarray(m, dtype=np.float64)
            if m.ndim != 2 or m.shape[0] < 1:
                raise MfldError(f"manifold {lab!r}: expected a non-empty 2-d matrix")
            if not np.all(np.isfinite(m)):
                raise MfldError(f"manifold {lab!r}: non-finite feature values")
            m.flags.writeable = False
            mats.append(m)
        dims = {m.shape[1] for m in mats}
        if len(dims) != 1:
            raise MfldError(f"manifolds disagree on feature dim: {sorted(dims)}")
        self.matrices = mats

    @property
    def n_manifolds(self) -> int:
        return len(self.matrices)

    @property
    def feature_dim(self) -> int:
        return self.matrices[0].shape[1]

    @property
    def sizes(self) -> list[int]:
        return [m.shape[0] for m in self.matrices]

    def pooled(self) -> np.ndarray:
        """All rows stacked in manifold order."""
        return np.concatenate(self.matrices, axis=0)

    def replace(self, matrices, **provenance) -> "ManifoldSet":
        return ManifoldSet(
            labels=list(self.labels),
            matrices=list(matrices),
            provenance={**self.provenance, **provenance},
        )


def assemble_manifolds(
    store: ActivationStore,
    manifold_key: str,
    layer: str,
    timestep_selector: int | str = FLATTEN_ALL,
) -> ManifoldSet:
    """Group one layer's rows by label value under ``manifold_key``.

    ``flatten-all`` concatenates every timestep into one feature vector of
    length timesteps*features; an integer or ``center`` (= floor(T/2)) picks a
    single frame.
    """
    store.validate()
    rec = store.layer(layer)
    n_examples, timesteps, features = rec.shape
    if timestep_selector == FLATTEN_ALL:
        flat = rec.data.reshape(n_examples, timesteps * features)
    else:
        if timestep_selector == CENTER:
            t = timesteps // 2
        else:
            t = int(timestep_selector)
        if not 0 <= t < timesteps:
            raise MfldError(f"timestep {t} out of range for layer {layer!r} with {timesteps} steps")
        flat = rec.data[:, t, :]
    flat = np.asarray(flat, dtype=np.float64)

    by_label: dict[str, list[int]] = {}
    missing = 0
    for i, ex in enumerate(store.manifest):
        if manifold_key not in ex.labels:
            missing += 1
            continue
        by_label.setdefault(ex.labels[manifold_key], []).append(i)
    if not by_label:
        raise MfldError(f"manifold key {manifold_key!r} not present in manifest")
    if missing:
        warnings.warn(f"{missing} examples lack label key {manifold_key!r} and were omitted")
    labels = sorted(by_label)
    if len(labels) < 2:
        raise TooFewManifolds(f"key {manifold_key!r} has {len(labels)} distinct value(s), need >= 2")
    matrices = [flat[by_label[lab]] for lab in labels]
    return ManifoldSet(
        labels=labels,
        matrices=matrices,
        provenance={
            "layer": layer,
            "timestep_selector": str(timestep_selector),
            "manifold_key": manifold_key,
        },
    )


def projection_matrix(
    n_features: int, target_dim: int, seed, orthonormalize: bool = False
) -> np.ndarray:
    """Gaussian matrix with unit-norm columns (optionally orthonormalized)."""
    if target_dim < 1:
        raise MfldError("target_dim must be >= 1")
    rng = np.random.default_rng(seed)
    proj = rng.standard_normal((n_features, target_dim))
    if orthonormalize:
        if target_dim > n_features:
            raise MfldError("cannot orthonormalize more columns than the feature dim")
        proj, _ = np.linalg.qr(proj)
    else:
        proj /= np.linalg.norm(proj, axis=0, keepdims=True)
    return proj


def random_project(
    mset: ManifoldSet, target_dim: int, seed, orthonormalize: bool = False
) -> ManifoldSet:
    """Project every row through a seeded Gaussian unit-column matrix.

    Projecting up (target_dim > N) maps into a subspace and preserves
    separability, but distances are only approximately preserved either way.
    """
    proj = projection_matrix(mset.feature_dim, target_dim, seed, orthonormalize)
    return mset.replace(
        [m @ proj for m in mset.matrices],
        projection_seed=seed,
        projection_dim=target_dim,
    )


def permute_labels(mset: ManifoldSet, seed) -> ManifoldSet:
    """Pool all rows and deal them back out at random, keeping each M_mu.

    Destroys within-manifold structure while preserving the pooled row
    multiset, which drives capacity toward the structureless lower bound.
    """
    rng = np.random.default_rng(seed)
    pooled = mset.pooled()
    order = rng.permutation(pooled.shape[0])
    shuffled = pooled[order]
    bounds = np.cumsum([0] + mset.sizes)
    matrices = [shuffled[bounds[i]:bounds[i + 1]] for i in range(mset.n_manifolds)]
    return mset.replace(matrices, permutation_seed=seed)
