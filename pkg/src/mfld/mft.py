"""Mean-field capacity and manifold geometry.

Per manifold, Gaussian samples T are projected onto the constraint set
{V : V . S_i <= -kappa} over the manifold's embedded points; the projection
distance and the KKT-weighted anchor point drive the capacity and the
radius/dimension estimators:

    inv_capacity = < [t0 + t . s]_+^2 / (1 + |s|^2) >   (= <lambda^2>)
    R_M^2        = < |s|^2 >            over support samples
    D_M          = < (t . s_hat)^2 >    over support samples

where s is the anchor's component in the manifold's embedded coordinates and
the extra coordinate is the center direction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import nnls
from scipy.stats import norm

from .errors import MfldError
from .geometry import preprocess
from .seeding import rng_for, seed_list
from .manifolds import ManifoldSet

KKT_TOL = 1e-8
STATIONARITY_TOL = 1e-6
MAX_WORKING_SET_ROUNDS = 100
DIRECT_NNLS_LIMIT = 512  # constraint counts above this use the working-set loop


class AnchorFailure(MfldError):
    """The anchor QP failed its KKT certificate; the sample is resampled."""


@dataclass
class LocalManifold:
    """A manifold in its own affine frame.

    ``basis`` (N x D, orthonormal) spans the centered point cloud; embedded
    points carry D coordinates plus a final center coordinate that equals 1
    for every point, so ``points[i] = basis @ embedded[i, :D] + center``.
    """

    center: np.ndarray     # (N,), unit norm after preprocessing
    basis: np.ndarray      # (N, D)
    embedded: np.ndarray   # (M, D+1), last column all ones
    rank: int              # D

    @property
    def n_points(self) -> int:
        return self.embedded.shape[0]


@dataclass
class AnchorSolution:
    """One Gaussian sample's QP outcome."""

    sample: np.ndarray             # T, (D+1,)
    projection: np.ndarray         # V*, (D+1,)
    lam: float                     # ||T - V*||
    weights: np.ndarray            # KKT multipliers, (M,), >= 0
    s_tilde: np.ndarray | None     # (D+1,), weighted support combination; None when interior

    @property
    def interior(self) -> bool:
        return self.s_tilde is None


@dataclass
class ManifoldMetrics:
    """Monte Carlo capacity and geometry estimates for one manifold."""

    label: str
    inv_capacity: float
    alpha: float
    stderr_inv: float
    stderr_alpha: float
    radius: float            # R_M
    dimension: float         # D_M
    rank: int                # frame rank D
    n_points: int
    n_samples: int
    n_interior: int
    n_rejected: int
    flags: list[str] = field(default_factory=list)


@dataclass
class MFTReport:
    """Aggregate mean-field results for a manifold set."""

    per_manifold: list[ManifoldMetrics]
    alpha: float
    stderr_alpha: float
    inv_capacity: float
    alpha_lb: float
    alpha_norm: float             # alpha / alpha_lb
    mean_radius: float
    mean_dimension: float
    mean_dim_over_m: float        # mean of D_M / M_mu
    rho_center_pre: float
    rho_center_post: float
    center_subspace_dim: int
    excluded_labels: list[str]
    n_rejected: int


def _canonical_signs(coords: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-|.| entry is positive.

    Makes the embedding reproducible under orthogonal transforms of the
    ambient features (SVD right-vectors are otherwise sign-ambiguous).
    """
    if coords.shape[1] == 0:
        return coords
    idx = np.argmax(np.abs(coords), axis=0)
    signs = np.sign(coords[idx, np.arange(coords.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def build_local_frame(manifold: np.ndarray, center: np.ndarray) -> LocalManifold:
    """Orthonormal basis of the centered cloud plus center-coordinate-1 embedding."""
    X = np.asarray(manifold, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    Xc = X - center
    if X.shape[0] == 1:
        basis = np.zeros((X.shape[1], 0))
        coords = np.zeros((1, 0))
        rank = 0
    else:
        _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
        tol = 1e-10 * s[0] if s.size and s[0] > 0 else 0.0
        rank = int(np.sum(s > tol))
        basis = Vt[:rank].T
        coords = Xc @ basis
        signs = _canonical_signs(coords)
        basis = basis * signs
        coords = coords * signs
    embedded = np.concatenate([coords, np.ones((X.shape[0], 1))], axis=1)
    return LocalManifold(center=center, basis=basis, embedded=embedded, rank=rank)


def _certify(S: np.ndarray, T: np.ndarray, V: np.ndarray, w: np.ndarray, kappa: float):
    """KKT certificate: feasibility, stationarity, complementary slackness."""
    margins = S @ V + kappa
    if margins.max(initial=-np.inf) > KKT_TOL:
        raise AnchorFailure(f"feasibility violated by {margins.max():.2e}")
    resid = T - V - S.T @ w
    if np.linalg.norm(resid) > STATIONARITY_TOL * max(1.0, np.linalg.norm(T)):
        raise AnchorFailure("stationarity residual too large")
    slack = np.abs(w * margins)
    if slack.max(initial=0.0) > KKT_TOL:
        raise AnchorFailure(f"complementary slackness violated by {slack.max():.2e}")


def _solve_direct(S: np.ndarray, b: np.ndarray) -> np.ndarray:
    w, _ = nnls(S.T, b)
    return w


def _solve_working_set(S: np.ndarray, T: np.ndarray, b: np.ndarray, kappa: float,
                       chunk: int = 256) -> np.ndarray:
    """NNLS on a growing working set of the most-violated constraints.

    Exact on termination: the final multipliers are verified feasible against
    every constraint before being accepted.
    """
    M = S.shape[0]
    margins = S @ T + kappa
    order = np.argsort(margins)[::-1][:chunk]
    work = [int(i) for i in order if margins[i] > -1e-12] or [int(order[0])]
    in_work = np.zeros(M, dtype=bool)
    in_work[work] = True
    for _ in range(MAX_WORKING_SET_ROUNDS):
        ws = np.flatnonzero(in_work)
        w_ws = _solve_direct(S[ws], b)
        V = T - S[ws].T @ w_ws
        viol = S @ V + kappa
        viol[ws] = -np.inf
        worst = np.argsort(viol)[::-1][:chunk]
        worst = worst[viol[worst] > 1e-10]
        if worst.size == 0:
            w = np.zeros(M)
            w[ws] = w_ws
            return w
        in_work[worst] = True
    raise AnchorFailure("working set did not close after iteration cap")


def solve_anchor(local: LocalManifold, T: np.ndarray, kappa: float = 0.0) -> AnchorSolution:
    """Project T onto {V : V . S_i <= -kappa} and recover the anchor point.

    The dual is nonnegative least squares against the embedded points (for
    kappa > 0 the target shifts by kappa along the center coordinate), so the
    multipliers come from an exact active-set NNLS solve. Solutions failing
    the KKT certificate raise AnchorFailure.
    """
    S = local.embedded
    T = np.asarray(T, dtype=np.float64)
    if T.shape != (local.rank + 1,):
        raise MfldError(f"sample must have length {local.rank + 1}")
    if kappa < 0:
        raise MfldError("kappa must be >= 0")
    if np.all(S @ T <= -kappa + 1e-12):
        return AnchorSolution(sample=T, projection=T.copy(), lam=0.0,
                              weights=np.zeros(S.shape[0]), s_tilde=None)
    b = T.copy()
    b[-1] += kappa
    if S.shape[0] <= DIRECT_NNLS_LIMIT:
        w = _solve_direct(S, b)
    else:
        w = _solve_working_set(S, T, b, kappa)
    V = T - S.T @ w
    _certify(S, T, V, w, kappa)
    total = w.sum()
    if total <= 0:
        raise AnchorFailure("zero multiplier mass on a non-interior sample")
    s_tilde = (S.T @ w) / total
    return AnchorSolution(sample=T, projection=V,
                          lam=float(np.linalg.norm(T - V)), weights=w, s_tilde=s_tilde)


def anchor_contributions(sol: AnchorSolution, rank: int) -> tuple[float, float, float]:
    """(inverse-capacity, R_M^2, D_M) contributions of one support sample."""
    s_embed = sol.s_tilde[:rank]
    norm_embed = float(np.linalg.norm(s_embed))
    rm2 = norm_embed ** 2
    if norm_embed > 1e-12:
        dm = float(sol.sample[:rank] @ s_embed / norm_embed) ** 2
    else:
        # anchor is the pure center direction; the sample projects onto t0
        dm = float(sol.sample[rank]) ** 2
    return sol.lam ** 2, rm2, dm


def manifold_geometry(local: LocalManifold, n_t: int = 200, seed=0,
                      kappa: float = 0.0, label: str = "") -> ManifoldMetrics:
    """Monte Carlo averages of the capacity and geometry estimators.

    Draws n_t iid standard-normal samples (deterministic in seed); rejected
    QP solves are replaced by fresh draws and counted. Interior samples
    contribute 0 to inverse capacity and are excluded from R_M and D_M.
    """
    if n_t < 1:
        raise MfldError("n_t must be >= 1")
    rng = rng_for(seed)
    dim = local.rank + 1
    inv = np.zeros(n_t)
    rm2, dm = [], []
    n_interior = 0
    n_rejected = 0
    rejection_cap = 10 * n_t + 100
    for i in range(n_t):
        while True:
            T = rng.standard_normal(dim)
            try:
                sol = solve_anchor(local, T, kappa)
                break
            except AnchorFailure:
                n_rejected += 1
                if n_rejected > rejection_cap:
                    raise
        if sol.interior:
            n_interior += 1
            continue
        contrib, r2, d = anchor_contributions(sol, local.rank)
        inv[i] = contrib
        rm2.append(r2)
        dm.append(d)
    inv_capacity = float(inv.mean())
    stderr_inv = float(inv.std(ddof=1) / math.sqrt(n_t)) if n_t > 1 else float("nan")
    flags = []
    if inv_capacity <= 0.0:
        warnings.warn(f"manifold {label!r}: all samples interior; capacity unbounded")
        flags.append("all-interior")
        alpha = math.inf
        stderr_alpha = float("nan")
    else:
        alpha = 1.0 / inv_capacity
        stderr_alpha = stderr_inv / inv_capacity ** 2
    radius = math.sqrt(float(np.mean(rm2))) if rm2 else (0.0 if not flags else float("nan"))
    dimension = float(np.mean(dm)) if dm else float("nan")
    if not rm2:
        flags.append("no-support-samples")
    return ManifoldMetrics(
        label=label, inv_capacity=inv_capacity, alpha=alpha,
        stderr_inv=stderr_inv, stderr_alpha=stderr_alpha,
        radius=radius, dimension=dimension, rank=local.rank,
        n_points=local.n_points, n_samples=n_t,
        n_interior=n_interior, n_rejected=n_rejected, flags=flags,
    )


def aggregate_capacity(metrics: list[ManifoldMetrics]) -> float:
    """Overall alpha = 1 / mean(per-manifold inverse capacities).

    Inverse capacities average because the critical feature budget of the
    whole set is the sum of per-manifold budgets. Degenerate (all-interior)
    manifolds are skipped.
    """
    usable = [m for m in metrics if m.inv_capacity > 0.0]
    if not metrics:
        raise MfldError("no metrics to aggregate")
    if not usable:
        return math.inf
    return 1.0 / float(np.mean([m.inv_capacity for m in usable]))


def ball_capacity(radius: float, dim: float) -> float:
    """Capacity of a ball with the given relative radius and dimension.

    Evaluates the Gaussian-measure integral of (a - t0)^2 / (R^2 + 1) up to
    a = R*sqrt(D) by adaptive quadrature (abs tol 1e-10) and returns its
    reciprocal.
    """
    if radius < 0:
        raise MfldError("radius must be >= 0")
    if dim <= 0:
        raise MfldError("dim must be > 0")
    a = radius * math.sqrt(dim)
    scale = radius * radius + 1.0

    def integrand(t0):
        return norm.pdf(t0) * (a - t0) ** 2 / scale

    # the Gaussian weight is zero past ~40 sigma in f64; a finite window keeps
    # the adaptive subdivision on the mass even when a is enormous
    val, _ = quad(integrand, -40.0, min(a, 40.0), epsabs=1e-12, limit=400)
    return 1.0 / val


def analyze(mset: ManifoldSet, n_t: int = 200, seed=0, kappa: float = 0.0,
            variance_threshold: float = 0.90, corr_mode: str = "pearson") -> MFTReport:
    """Preprocess, run per-manifold geometry, and aggregate.

    alpha_lb = 2 / mean(M_mu) is the structureless lower bound used for the
    normalized capacity alpha_norm = alpha / alpha_lb.
    """
    pre = preprocess(mset, variance_threshold=variance_threshold, corr_mode=corr_mode)
    per = []
    for idx, (label, rows) in enumerate(zip(pre.mset.labels, pre.mset.matrices)):
        frame = build_local_frame(rows, pre.centers[idx])
        per.append(manifold_geometry(frame, n_t=n_t, seed=seed_list(seed, idx),
                                     kappa=kappa, label=label))
    alpha = aggregate_capacity(per)
    usable = [m for m in per if m.inv_capacity > 0.0]
    inv = float(np.mean([m.inv_capacity for m in usable])) if usable else 0.0
    stderr_alpha = (
        math.sqrt(sum(m.stderr_inv ** 2 for m in usable)) / len(usable) / inv ** 2
        if usable and inv > 0 else float("nan")
    )
    sizes = pre.mset.sizes
    alpha_lb = 2.0 / float(np.mean(sizes))
    radii = [m.radius for m in usable if not math.isnan(m.radius)]
    dims = [m.dimension for m in usable if not math.isnan(m.dimension)]
    dim_over_m = [m.dimension / m.n_points for m in usable if not math.isnan(m.dimension)]
    return MFTReport(
        per_manifold=per,
        alpha=alpha,
        stderr_alpha=stderr_alpha,
        inv_capacity=inv,
        alpha_lb=alpha_lb,
        alpha_norm=alpha / alpha_lb,
        mean_radius=float(np.mean(radii)) if radii else float("nan"),
        mean_dimension=float(np.mean(dims)) if dims else float("nan"),
        mean_dim_over_m=float(np.mean(dim_over_m)) if dim_over_m else float("nan"),
        rho_center_pre=pre.rho_center_pre,
        rho_center_post=pre.rho_center_post,
        center_subspace_dim=pre.basis.shape[1],
        excluded_labels=pre.excluded_labels,
        n_rejected=sum(m.n_rejected for m in per),
    )

