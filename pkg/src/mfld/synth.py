"""Synthetic manifold families with analytically known geometry.

Used as oracles: spherical (ball) manifolds of controlled radius and
dimension, Gaussian point clouds, and clouds with a planted mean center
correlation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MfldError
from .manifolds import ManifoldSet
from .store import ActivationStore, ExampleRecord, LayerRecord

FAMILIES = ("ball", "gaussian-cloud", "correlated-centers")


@dataclass
class SynthSpec:
    family: str
    n_manifolds: int            # P
    n_points: int               # M
    n_features: int             # N
    intrinsic_dim: int = 0      # D (ball family)
    radius: float = 1.0         # R, relative to unit center norm
    center_corr: float = 0.0    # planted mean center correlation, [0, 1)
    seed: int = 0
    solid: bool = False         # ball: sample the solid ball instead of the surface

    def validate(self):
        if self.family not in FAMILIES:
            raise MfldError(f"unknown family {self.family!r}")
        if self.n_manifolds < 2:
            raise MfldError("need P >= 2")
        if self.n_points < 1 or self.n_features < 1:
            raise MfldError("counts must be positive")
        if self.radius < 0:
            raise MfldError("radius must be >= 0")
        if self.family == "ball":
            if not 1 <= self.intrinsic_dim <= min(self.n_points - 1, self.n_features):
                raise MfldError("ball needs 1 <= D <= min(M-1, N)")
        if not 0 <= self.center_corr < 1:
            raise MfldError("center_corr must be in [0, 1)")


def _unit_rows(rng, shape) -> np.ndarray:
    v = rng.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def make_ball_manifolds(spec: SynthSpec) -> ManifoldSet:
    """P manifolds of M points on (or in) a radius-R sphere inside a random
    D-dim subspace around a random unit center; independent per manifold."""
    spec.validate()
    if spec.family != "ball":
        raise MfldError("spec.family must be 'ball'")
    streams = np.random.SeedSequence(spec.seed).spawn(spec.n_manifolds)
    matrices, centers = [], []
    for ss in streams:
        rng = np.random.default_rng(ss)
        center = _unit_rows(rng, spec.n_features)
        subspace, _ = np.linalg.qr(rng.standard_normal((spec.n_features, spec.intrinsic_dim)))
        sphere = _unit_rows(rng, (spec.n_points, spec.intrinsic_dim))
        if spec.solid:
            sphere *= rng.random((spec.n_points, 1)) ** (1.0 / spec.intrinsic_dim)
        matrices.append(center + spec.radius * (sphere @ subspace.T))
        centers.append(center)
    return ManifoldSet(
        labels=[f"ball{i:03d}" for i in range(spec.n_manifolds)],
        matrices=matrices,
        provenance={"family": "ball", "seed": spec.seed, "radius": spec.radius,
                    "intrinsic_dim": spec.intrinsic_dim,
                    "planted_centers": np.stack(centers)},
    )


def make_gaussian_clouds(spec: SynthSpec) -> ManifoldSet:
    """Gaussian clouds around unit centers; the correlated-centers family
    blends a shared vector into every center before renormalizing.

    Point noise is scaled R/sqrt(N) per coordinate so R stays interpretable
    as the relative manifold radius after center normalization.
    """
    spec.validate()
    if spec.family not in ("gaussian-cloud", "correlated-centers"):
        raise MfldError("spec.family must be gaussian-cloud or correlated-centers")
    root = np.random.SeedSequence(spec.seed)
    shared_stream, *streams = root.spawn(spec.n_manifolds + 1)
    shared = _unit_rows(np.random.default_rng(shared_stream), spec.n_features)
    rho = spec.center_corr if spec.family == "correlated-centers" else 0.0
    matrices = []
    for ss in streams:
        rng = np.random.default_rng(ss)
        center = _unit_rows(rng, spec.n_features)
        if rho > 0:
            center = np.sqrt(rho) * shared + np.sqrt(1 - rho) * center
            center /= np.linalg.norm(center)
        noise = rng.standard_normal((spec.n_points, spec.n_features))
        matrices.append(center + (spec.radius / np.sqrt(spec.n_features)) * noise)
    return ManifoldSet(
        labels=[f"cloud{i:03d}" for i in range(spec.n_manifolds)],
        matrices=matrices,
        provenance={"family": spec.family, "seed": spec.seed, "radius": spec.radius,
                    "center_corr": rho},
    )


def make_manifolds(spec: SynthSpec) -> ManifoldSet:
    if spec.family == "ball":
        return make_ball_manifolds(spec)
    return make_gaussian_clouds(spec)


def to_store(mset: ManifoldSet, label_key: str = "label") -> ActivationStore:
    """Pack a manifold set as a single-layer, single-timestep store."""
    data = mset.pooled()[:, None, :]
    manifest = []
    i = 0
    for label, m in zip(mset.labels, mset.matrices):
        for _ in range(m.shape[0]):
            manifest.append(ExampleRecord(id=f"ex{i:06d}", labels={label_key: label}))
            i += 1
    store = ActivationStore(layers=[LayerRecord("synth", "f64", data)], manifest=manifest)
    store.validate()
    return store
