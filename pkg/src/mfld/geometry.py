"""Preprocessing for the mean-field analysis: global centering, center
statistics, shared center-subspace removal, and center-norm normalization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MfldError
from .manifolds import ManifoldSet


@dataclass
class CenterStats:
    """Per-manifold centers plus their pairwise correlation structure."""

    centers: np.ndarray          # (P, N)
    pairwise_corr: np.ndarray    # (P, P), symmetric, unit diagonal
    rho_center: float            # mean |off-diagonal|
    degenerate: list[int] = field(default_factory=list)  # zero-variance centers


@dataclass
class PreprocessedSet:
    """Residual manifolds ready for per-manifold geometry.

    Rows are orthogonal to ``basis`` and scaled so each manifold's center has
    unit norm. Manifolds whose center collapses under projection are excluded
    and listed by index in ``excluded``.
    """

    mset: ManifoldSet
    centers: np.ndarray            # (P_kept, N), unit norm
    basis: np.ndarray              # (N, k), orthonormal
    scales: np.ndarray             # per-kept-manifold divisor
    rho_center_pre: float
    rho_center_post: float
    excluded: list[int] = field(default_factory=list)
    excluded_labels: list[str] = field(default_factory=list)


def subtract_global_mean(mset: ManifoldSet) -> ManifoldSet:
    """Shift all rows so the pooled mean is the zero vector."""
    mu = mset.pooled().mean(axis=0)
    return mset.replace([m - mu for m in mset.matrices])


def manifold_centers(mset: ManifoldSet) -> np.ndarray:
    return np.stack([m.mean(axis=0) for m in mset.matrices])


def _pairwise_correlation(centers: np.ndarray, mode: str) -> tuple[np.ndarray, list[int]]:
    if mode == "pearson":
        vecs = centers - centers.mean(axis=1, keepdims=True)
    elif mode == "cosine":
        vecs = centers
    else:
        raise MfldError(f"unknown correlation mode {mode!r}")
    norms = np.linalg.norm(vecs, axis=1)
    scale = np.linalg.norm(centers, axis=1).max()
    degenerate = [i for i, n in enumerate(norms) if n <= 1e-12 * max(scale, 1e-300)]
    safe = norms.copy()
    safe[safe == 0] = 1.0
    corr = (vecs @ vecs.T) / np.outer(safe, safe)
    for i in degenerate:
        corr[i, :] = 0.0
        corr[:, i] = 0.0
    np.fill_diagonal(corr, 1.0)
    return corr, degenerate


def compute_centers(mset: ManifoldSet, mode: str = "pearson") -> CenterStats:
    """Row-mean centers and their pairwise correlations.

    ``mode='pearson'`` subtracts each center's coordinate mean before the
    cosine (the default); ``mode='cosine'`` uses raw cosines.
    """
    centers = manifold_centers(mset)
    corr, degenerate = _pairwise_correlation(centers, mode)
    if degenerate:
        warnings.warn(f"{len(degenerate)} centers have zero variance; correlations set to 0")
    P = len(centers)
    off = corr[~np.eye(P, dtype=bool)]
    rho = float(np.abs(off).mean()) if off.size else 0.0
    return CenterStats(centers=centers, pairwise_corr=corr, rho_center=rho,
                       degenerate=degenerate)


def find_center_subspace(centers: CenterStats | np.ndarray, variance_threshold: float = 0.90) -> np.ndarray:
    """Orthonormal basis (N x k) of the significant shared center structure.

    SVD of the centroid-subtracted center matrix; components are taken in
    decreasing order while their variance share stands out from an
    unstructured (flat) spectrum, stopping once ``variance_threshold`` of the
    total is captured. A threshold >= 1 takes the full numerical rank, which
    is the exhaustive-removal limit. The significance gate keeps the basis
    empty for generic uncorrelated centers, so preprocessing leaves such data
    untouched.
    """
    C = centers.centers if isinstance(centers, CenterStats) else np.asarray(centers, dtype=np.float64)
    P, N = C.shape
    if P < 2:
        raise MfldError("need at least 2 centers")
    Cm = C - C.mean(axis=0, keepdims=True)
    _, s, Vt = np.linalg.svd(Cm, full_matrices=False)
    # absolute rank cut, tied to the raw center scale so all-equal centers give k=0
    scale = np.linalg.norm(C, axis=1).max()
    nz = int(np.sum(s > 1e-10 * max(scale, 1e-300)))
    kmax = min(nz, P - 1)
    if kmax == 0:
        return np.zeros((N, 0))
    if variance_threshold >= 1.0:
        return np.ascontiguousarray(Vt[:kmax].T)
    s2 = s[:kmax] ** 2
    shares = s2 / s2.sum()
    flat_cutoff = min(1.0, 2.0 / kmax)
    k, acc = 0, 0.0
    for i in range(kmax):
        if shares[i] < flat_cutoff:
            break
        k += 1
        acc += shares[i]
        if acc >= variance_threshold:
            break
    return np.ascontiguousarray(Vt[:k].T)


def project_residual(mset: ManifoldSet, basis: np.ndarray) -> ManifoldSet:
    """Replace every row x by x - B B^T x (idempotent; identity for empty B)."""
    if basis.shape[1] == 0:
        return mset.replace(list(mset.matrices))
    return mset.replace([m - (m @ basis) @ basis.T for m in mset.matrices])


def normalize_centers(mset: ManifoldSet) -> tuple[ManifoldSet, np.ndarray, np.ndarray, list[int]]:
    """Divide each manifold's rows by its own center norm.

    Returns (normalized set over the kept manifolds, unit centers, scales,
    excluded indices). Manifolds whose center norm vanishes are excluded with
    a warning rather than rescaled.
    """
    centers = manifold_centers(mset)
    norms = np.linalg.norm(centers, axis=1)
    scale = norms.max()
    keep = [i for i, n in enumerate(norms) if n > 1e-12 * max(scale, 1e-300)]
    excluded = [i for i in range(mset.n_manifolds) if i not in keep]
    if excluded:
        warnings.warn(
            f"{len(excluded)} manifolds have degenerate (zero-norm) centers and are excluded"
        )
    if len(keep) < 2:
        raise MfldError("fewer than 2 manifolds remain after excluding degenerate centers")
    matrices = [mset.matrices[i] / norms[i] for i in keep]
    out = ManifoldSet(
        labels=[mset.labels[i] for i in keep],
        matrices=matrices,
        provenance=dict(mset.provenance),
    )
    unit_centers = centers[keep] / norms[keep, None]
    return out, unit_centers, norms[keep], excluded


def preprocess(mset: ManifoldSet, variance_threshold: float = 0.90,
               corr_mode: str = "pearson") -> PreprocessedSet:
    """Full preprocessing chain: center globally, strip the shared center
    subspace, normalize center norms; records rho_center before and after."""
    centered = subtract_global_mean(mset)
    stats_pre = compute_centers(centered, mode=corr_mode)
    basis = find_center_subspace(stats_pre, variance_threshold)
    residual = project_residual(centered, basis)
    stats_post = compute_centers(residual, mode=corr_mode)
    normalized, unit_centers, scales, excluded = normalize_centers(residual)
    return PreprocessedSet(
        mset=normalized,
        centers=unit_centers,
        basis=basis,
        scales=scales,
        rho_center_pre=stats_pre.rho_center,
        rho_center_post=stats_post.rho_center,
        excluded=excluded,
        excluded_labels=[mset.labels[i] for i in excluded],
    )
