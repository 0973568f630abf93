from __future__ import annotations

import numpy as np
import pytest

from mfld import ActivationStore, LayerRecord, ManifoldSet
from mfld.store import ExampleRecord


@pytest.fixture
def tiny_store():
    """Two layers, 6 examples, 2 timesteps, 3 features; two label keys."""
    rng = np.random.default_rng(0)
    layers = [
        LayerRecord("conv1", "f64", rng.standard_normal((6, 2, 3))),
        LayerRecord("conv2", "f32", rng.standard_normal((6, 2, 3))),
    ]
    manifest = [
        ExampleRecord(id=f"ex{i}", labels={"word": w, "speaker": s}, center_frame=1)
        for i, (w, s) in enumerate(
            [("cat", "a"), ("cat", "b"), ("dog", "a"), ("dog", "b"), ("cow", "a"), ("cow", "b")]
        )
    ]
    return ActivationStore(layers=layers, manifest=manifest)


def random_mset(rng, p=4, m=10, n=30, spread=0.3) -> ManifoldSet:
    centers = rng.standard_normal((p, n))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    mats = [centers[i] + spread / np.sqrt(n) * rng.standard_normal((m, n)) for i in range(p)]
    return ManifoldSet(labels=[f"m{i}" for i in range(p)], matrices=mats)


def random_orthogonal(rng, n) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
