"""Spectral dimension metrics and the linear-classifier generalization probe."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import MfldError
from .manifolds import ManifoldSet
from .seeding import rng_for


@dataclass
class SpectrumMetrics:
    eigenvalues: np.ndarray      # descending, nonnegative
    participation_ratio: float
    explained_variance_dim: int
    variance_threshold: float


@dataclass
class ProbeResult:
    accuracies: np.ndarray       # one per split
    mean: float
    stderr: float                # standard deviation of the mean
    n_splits: int
    train_frac: float
    excluded_labels: list[str]


def eigenspectrum(rows: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of the sample covariance ((n-1) convention).

    Computed from singular values of the centered data, so at most
    min(n-1, N) entries are nonzero; tiny negatives would indicate a broken
    eigensolver and are clipped at -1e-10 * max.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise MfldError("need at least 2 rows for a covariance spectrum")
    Xc = X - X.mean(axis=0)
    s = np.linalg.svd(Xc, compute_uv=False)
    eig = s ** 2 / (X.shape[0] - 1)
    top = eig.max(initial=0.0)
    if np.any(eig < -1e-10 * top):
        raise MfldError("covariance produced significantly negative eigenvalues")
    return np.clip(eig, 0.0, None)


def participation_ratio(spectrum: np.ndarray) -> float:
    """(sum lambda)^2 / sum lambda^2 - a soft count of active dimensions."""
    lam = np.asarray(spectrum, dtype=np.float64)
    total = lam.sum()
    if total <= 0:
        raise MfldError("participation ratio needs a positive spectrum")
    return float(total ** 2 / np.sum(lam ** 2))


def explained_variance_dim(spectrum: np.ndarray, threshold: float = 0.90) -> int:
    """Smallest k whose top-k eigenvalues reach the given variance fraction."""
    lam = np.asarray(spectrum, dtype=np.float64)
    total = lam.sum()
    if total <= 0:
        raise MfldError("explained variance needs positive total variance")
    frac = np.cumsum(lam) / total
    return int(np.searchsorted(frac, threshold - 1e-12) + 1)


def spectrum_metrics(rows: np.ndarray, threshold: float = 0.90) -> SpectrumMetrics:
    eig = eigenspectrum(rows)
    return SpectrumMetrics(
        eigenvalues=eig,
        participation_ratio=participation_ratio(eig),
        explained_variance_dim=explained_variance_dim(eig, threshold),
        variance_threshold=threshold,
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _train_softmax(X: np.ndarray, y: np.ndarray, n_classes: int,
                   l2: float = 0.0, grad_tol: float = 1e-5,
                   max_iter: int = 5000) -> np.ndarray:
    """Full-batch gradient descent with Armijo backtracking on the
    cross-entropy of a multinomial linear classifier (bias absorbed)."""
    n, d = X.shape
    Y = np.zeros((n, n_classes))
    Y[np.arange(n), y] = 1.0
    W = np.zeros((d, n_classes))

    def loss_grad(W):
        p = _softmax(X @ W)
        ll = -np.sum(Y * np.log(np.clip(p, 1e-300, None))) / n
        g = X.T @ (p - Y) / n
        if l2 > 0:
            ll += 0.5 * l2 * np.sum(W * W)
            g = g + l2 * W
        return ll, g

    step = 1.0
    loss, grad = loss_grad(W)
    for _ in range(max_iter):
        gnorm2 = float(np.sum(grad * grad))
        if math.sqrt(gnorm2) <= grad_tol:
            break
        step *= 2.0
        for _ in range(60):
            W_new = W - step * grad
            loss_new, grad_new = loss_grad(W_new)
            if loss_new <= loss - 0.5 * step * gnorm2 * 1e-4:
                break
            step *= 0.5
        W, loss, grad = W_new, loss_new, grad_new
    return W


def classifier_probe(mset: ManifoldSet, n_splits: int = 10, train_frac: float = 0.8,
                     seed=0, l2: float = 0.0) -> ProbeResult:
    """Test accuracy of a softmax linear classifier over stratified splits.

    Classes with fewer than 2 points are excluded with a warning so every
    class appears on both sides of each split. Reports the mean accuracy and
    the standard deviation of the mean across splits.
    """
    if not 0 < train_frac < 1:
        raise MfldError("train_frac must be in (0, 1)")
    keep = [i for i, m in enumerate(mset.matrices) if m.shape[0] >= 2]
    excluded = [mset.labels[i] for i in range(mset.n_manifolds) if i not in keep]
    if excluded:
        warnings.warn(f"classes with < 2 points excluded from probe: {excluded}")
    if len(keep) < 2:
        raise MfldError("need at least 2 classes with >= 2 points")
    mats = [mset.matrices[i] for i in keep]
    X = np.concatenate(mats, axis=0)
    X = np.concatenate([X, np.ones((len(X), 1))], axis=1)
    y = np.repeat(np.arange(len(mats)), [m.shape[0] for m in mats])

    accs = np.zeros(n_splits)
    for split in range(n_splits):
        rng = rng_for(seed, split)
        train_idx, test_idx = [], []
        offset = 0
        for m in mats:
            n = m.shape[0]
            order = offset + rng.permutation(n)
            n_train = min(max(int(round(train_frac * n)), 1), n - 1)
            train_idx.extend(order[:n_train])
            test_idx.extend(order[n_train:])
            offset += n
        train_idx, test_idx = np.asarray(train_idx), np.asarray(test_idx)
        W = _train_softmax(X[train_idx], y[train_idx], len(mats), l2=l2)
        pred = np.argmax(X[test_idx] @ W, axis=1)
        accs[split] = float(np.mean(pred == y[test_idx]))
    return ProbeResult(
        accuracies=accs,
        mean=float(accs.mean()),
        stderr=float(accs.std(ddof=1) / math.sqrt(n_splits)) if n_splits > 1 else float("nan"),
        n_splits=n_splits,
        train_frac=train_frac,
        excluded_labels=excluded,
    )

