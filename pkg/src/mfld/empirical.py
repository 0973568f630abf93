"""Empirical capacity: linear separability of random dichotomies under random
projections, with a bisection search for the critical feature count."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import MfldError, NonBracketable
from .manifolds import ManifoldSet, projection_matrix
from .seeding import rng_for, seed_list

STRICT_TOL = 1e-9          # LP margins at or below this are Marginal -> inseparable
PG_WITNESS_TOL = 1e-7      # separating-witness margin the fast pre-pass must clear
PG_PREPASS_ITERS = 150
PG_BAIL_DISTANCE = 1e-3    # hull-distance upper bound that sends a trial to the LP
PG_MARGIN_ITERS = 20000
LP_WORKING_ROWS = 1024


@dataclass
class Dichotomy:
    """±1 labels, one per manifold; never all equal."""

    signs: np.ndarray

    def __post_init__(self):
        self.signs = np.asarray(self.signs, dtype=np.float64)
        if not np.all(np.abs(self.signs) == 1.0):
            raise MfldError("dichotomy signs must be +/-1")
        if np.all(self.signs == self.signs[0]):
            raise MfldError("all-equal dichotomies are excluded")


@dataclass
class CapacityEstimate:
    """Bisection result: critical feature count and the measured curve."""

    n_critical: int
    alpha_sim: float
    fraction_at_critical: float
    curve: list[tuple[int, float, int]]     # (N, fraction, n_dichotomies)
    trace: list[str] = field(default_factory=list)
    n_marginal: int = 0


def sample_dichotomy(n_manifolds: int, rng: np.random.Generator) -> Dichotomy:
    while True:
        signs = np.where(rng.random(n_manifolds) < 0.5, 1.0, -1.0)
        if not np.all(signs == signs[0]):
            return Dichotomy(signs)


def _signed_rows(points: np.ndarray, signs_per_row: np.ndarray) -> np.ndarray:
    """Unit-normalized y_i * [x_i, 1] rows (bias absorbed as a constant feature)."""
    Z = np.concatenate([points, np.ones((len(points), 1))], axis=1)
    Z = signs_per_row[:, None] * Z
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def canonical_coordinates(pooled: np.ndarray) -> np.ndarray:
    """Pooled rows in their sign-canonicalized principal frame.

    A pure rotation of the feature axes: separability is untouched and the
    Gaussian projection ensemble keeps its distribution, but the coordinates
    (hence every seeded trial) become identical under any orthogonal
    transform of the ambient features. Sign ambiguity is fixed by making each
    column's largest-magnitude entry positive; assumes the generic case of
    distinct singular values.
    """
    _, _, vt = np.linalg.svd(pooled, full_matrices=False)
    coords = pooled @ vt.T
    idx = np.argmax(np.abs(coords), axis=0)
    signs = np.sign(coords[idx, np.arange(coords.shape[1])])
    signs[signs == 0] = 1.0
    return coords * signs


def _project_simplex(x: np.ndarray) -> np.ndarray:
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(x) + 1) > (css - 1))[0][-1]
    lam = (css[rho] - 1) / (rho + 1.0)
    return np.maximum(x - lam, 0.0)


def _power_norm2(Z: np.ndarray, iters: int = 8) -> float:
    v = Z.mean(axis=0)
    nv = np.linalg.norm(v)
    v = v / nv if nv > 0 else np.ones(Z.shape[1]) / math.sqrt(Z.shape[1])
    for _ in range(iters):
        v = Z.T @ (Z @ v)
        v /= np.linalg.norm(v)
    return float(v @ (Z.T @ (Z @ v)))


def _hull_distance_bounds(Z: np.ndarray, max_iter: int, target_low: float,
                          target_high: float) -> tuple[float, float, np.ndarray]:
    """Bounds on dist(0, conv(Z)) via accelerated projected gradient on the
    simplex (min |Z^T a|^2). Any iterate gives an upper bound |Z^T a|; its
    normalized direction gives the lower bound min_i z_i . v_hat. Stops once
    the bounds resolve (lower >= target_low) or (upper < target_high).
    Returns (lower, upper, last direction)."""
    n = len(Z)
    a = np.full(n, 1.0 / n)
    a_prev = a
    L = 2.0 * _power_norm2(Z) * 1.05
    lower, upper = -math.inf, math.inf
    v = Z.T @ a
    for it in range(max_iter):
        yk = a + (it / (it + 3.0)) * (a - a_prev)
        grad = 2.0 * (Z @ (Z.T @ yk))
        a_prev, a = a, _project_simplex(yk - grad / L)
        if it % 10 == 0 or it == max_iter - 1:
            v = Z.T @ a
            nv = float(np.linalg.norm(v))
            upper = min(upper, nv)
            if nv > 0:
                lower = max(lower, float((Z @ (v / nv)).min()))
            if lower >= target_low or upper < target_high:
                break
    return lower, upper, v


def _lp_margin(Z: np.ndarray) -> float:
    """Exact best margin of the box-normalized separating LP:
    max delta s.t. Z w >= delta, -1 <= w <= 1, 0 <= delta <= 1."""
    return _lp_solve(Z)[0]


def _lp_solve(Z: np.ndarray) -> tuple[float, np.ndarray]:
    n, d = Z.shape
    c = np.zeros(d + 1)
    c[-1] = -1.0
    A_ub = np.concatenate([-Z, np.ones((n, 1))], axis=1)
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(n),
                  bounds=[(-1, 1)] * d + [(0, 1)], method="highs")
    if res.status != 0:
        raise MfldError(f"separability LP failed with status {res.status}")
    return float(-res.fun), res.x[:-1]


def _lp_margin_working_set(Z: np.ndarray, direction: np.ndarray) -> float:
    """Exact LP margin via a growing working set of the tightest rows.

    The subset optimum delta_ws upper-bounds the full optimum, so a subset
    value at or below the strict tolerance already certifies inseparability;
    otherwise the subset solution is verified against every row and violated
    rows join the set until the subset optimum is feasible for all of Z.
    """
    n = len(Z)
    if n <= LP_WORKING_ROWS:
        return _lp_margin(Z)
    nd = float(np.linalg.norm(direction))
    scores = Z @ (direction / nd) if nd > 0 else Z.sum(axis=1)
    order = np.argsort(scores)
    in_work = np.zeros(n, dtype=bool)
    in_work[order[:LP_WORKING_ROWS]] = True
    while True:
        delta, w = _lp_solve(Z[in_work])
        if delta <= STRICT_TOL:
            return delta
        margins = Z @ w
        viol = np.flatnonzero(~in_work & (margins < delta - 1e-12))
        if viol.size == 0:
            return delta
        worst = viol[np.argsort(margins[viol])[:LP_WORKING_ROWS]]
        in_work[worst] = True


def is_separable(points: np.ndarray, signs_per_row: np.ndarray,
                 margin: float = 0.0) -> bool:
    """True iff some w achieves y_i (w . x_i) >= margin * |w| for all rows.

    margin = 0 is decided exactly: a fast projected-gradient pre-pass may
    certify separability with an explicit witness, and anything undecided
    goes to a hard-margin feasibility LP. LP margins within 1e-9 of zero are
    treated as Marginal and counted inseparable (conservative). margin > 0
    compares the exact L2 polytope distance bounds against the margin; an
    unresolved bound gap after the iteration cap counts as inseparable.
    """
    points = np.asarray(points, dtype=np.float64)
    signs_per_row = np.asarray(signs_per_row, dtype=np.float64)
    if len(points) != len(signs_per_row):
        raise MfldError("points and signs differ in length")
    if margin < 0:
        raise MfldError("margin must be >= 0")
    Z = _signed_rows(points, signs_per_row)
    if margin > 0.0:
        lower, upper, _ = _hull_distance_bounds(Z, PG_MARGIN_ITERS,
                                                target_low=margin,
                                                target_high=margin * (1 - 1e-9))
        return lower >= margin
    if Z.size > 200_000:
        lower, _, direction = _hull_distance_bounds(
            Z, PG_PREPASS_ITERS, target_low=PG_WITNESS_TOL,
            target_high=PG_BAIL_DISTANCE)
        if lower >= PG_WITNESS_TOL:
            return True
        return _lp_margin_working_set(Z, direction) > STRICT_TOL
    return _lp_margin(Z) > STRICT_TOL


def fraction_separable(mset: ManifoldSet, n_features: int, n_dichotomies: int = 101,
                       seed=0, shared_projection: bool = False,
                       early_band: tuple[float, float] | None = None,
                       workers: int | None = None,
                       canonical_frame: bool = False) -> tuple[float, int]:
    """Fraction of random dichotomies separable after projecting to n_features.

    Each trial draws its own dichotomy and (by default) its own fresh
    unit-column Gaussian projection, seeded as [seed, trial], so results are
    order independent. Projections to n_features >= the ambient dim are
    skipped: an injective linear map preserves separability exactly.

    With ``early_band`` set, evaluation stops (in fixed chunks of 8) once a
    2.5-sigma binomial bound puts the fraction decisively outside the band.
    Returns (fraction, trials evaluated).
    """
    if n_features < 1:
        raise MfldError("n_features must be >= 1")
    pooled = mset.pooled()
    if canonical_frame:
        pooled = canonical_coordinates(pooled)
    pooled32 = pooled.astype(np.float32)
    sizes = np.asarray(mset.sizes)
    n0 = pooled.shape[1]
    shared = (
        projection_matrix(n0, n_features, seed_list(seed, 0xA11)).astype(np.float32)
        if shared_projection and n_features < n0 else None
    )

    def one_trial(trial: int) -> bool:
        rng = rng_for(seed, trial)
        dichotomy = sample_dichotomy(len(sizes), rng)
        y = np.repeat(dichotomy.signs, sizes)
        if n_features < n0:
            if shared is not None:
                proj = shared
            else:
                proj = rng.standard_normal((n0, n_features)).astype(np.float32)
                proj /= np.linalg.norm(proj, axis=0, keepdims=True)
            X = (pooled32 @ proj).astype(np.float64)
        else:
            X = pooled
        return is_separable(X, y)

    if workers is None:
        workers = _default_workers()
    n_sep = 0
    done = 0
    chunk = 8  # fixed so early stopping is worker-count independent
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        while done < n_dichotomies:
            batch = range(done, min(done + chunk, n_dichotomies))
            for ok in pool.map(one_trial, batch):
                n_sep += ok
            done = batch.stop
            if early_band is not None and done >= 12:
                phat = n_sep / done
                se = math.sqrt(max(phat * (1 - phat), 0.25 / done) / done)
                if phat - 2.5 * se > early_band[1] or phat + 2.5 * se < early_band[0]:
                    break
    return n_sep / done, done


def empirical_capacity(mset: ManifoldSet, n_dichotomies: int = 101, seed=0,
                       frac_tol: float = 0.05, shared_projection: bool = False,
                       adaptive: bool = True, max_features: int | None = None,
                       workers: int | None = None,
                       canonical_frame: bool = False) -> CapacityEstimate:
    """Bisection search for the feature count where half the dichotomies separate.

    Starts at N = P * mean(M) / 2, brackets by doubling/halving, then bisects
    integers (midpoint floored) until the bracket is within max(1, 2% of N_c)
    or the measured fraction falls within frac_tol of 1/2. ``adaptive`` lets
    bracketing evaluations stop early once decisive; the critical-region
    evaluations always use the full dichotomy count.
    """
    P = mset.n_manifolds
    n0 = mset.feature_dim
    if max_features is None:
        max_features = n0
    band = (0.5 - frac_tol, 0.5 + frac_tol)
    curve: dict[int, tuple[float, int]] = {}
    trace: list[str] = []

    def frac(n: int, full: bool) -> float:
        want = n_dichotomies if full else 0
        if n in curve and curve[n][1] >= want:
            return curve[n][0]
        f, k = fraction_separable(
            mset, n, n_dichotomies, seed=seed, shared_projection=shared_projection,
            early_band=None if (full or not adaptive) else band, workers=workers,
            canonical_frame=canonical_frame,
        )
        curve[n] = (f, k)
        trace.append(f"N={n} fraction={f:.4f} trials={k}")
        return f

    n_start = min(max_features, max(1, int(round(P * float(np.mean(mset.sizes)) / 2))))
    f = frac(n_start, full=False)
    n_lo = n_hi = None
    if f > band[1]:
        n_hi, n = n_start, n_start
        while n > 1:
            n = max(1, n // 2)
            f = frac(n, full=False)
            if f < band[0]:
                n_lo = n
                break
            if f > band[1]:
                n_hi = n
        if n_lo is None:
            raise NonBracketable("fraction never drops below 1/2 down to N=1",
                                 curve=_curve_list(curve))
    elif f < band[0]:
        n_lo, n = n_start, n_start
        while n < max_features:
            n = min(max_features, n * 2)
            f = frac(n, full=False)
            if f > band[1]:
                n_hi = n
                break
            if f < band[0]:
                n_lo = n
        if n_hi is None:
            raise NonBracketable(
                f"fraction never rises above 1/2 up to N={max_features}",
                curve=_curve_list(curve))
    else:
        n_lo = n_hi = n_start

    while n_lo != n_hi and (n_hi - n_lo) > max(1, int(0.02 * n_hi)):
        mid = (n_lo + n_hi) // 2
        # midpoints may stop early when decisively off 1/2; a non-decisive
        # evaluation runs to the full count on its own
        f = frac(mid, full=not adaptive)
        if abs(f - 0.5) <= frac_tol:
            n_lo = n_hi = mid
            break
        if f < 0.5:
            n_lo = mid
        else:
            n_hi = mid
    if n_lo == n_hi:
        n_c = n_lo
    else:
        f_lo, f_hi = frac(n_lo, full=True), frac(n_hi, full=True)
        n_c = n_lo if abs(f_lo - 0.5) <= abs(f_hi - 0.5) else n_hi
    f_c = frac(n_c, full=True)
    return CapacityEstimate(
        n_critical=n_c,
        alpha_sim=P / n_c,
        fraction_at_critical=f_c,
        curve=_curve_list(curve),
        trace=trace,
    )


def _curve_list(curve: dict[int, tuple[float, int]]) -> list[tuple[int, float, int]]:
    return sorted((n, f, k) for n, (f, k) in curve.items())



def _default_workers() -> int:
    env = os.environ.get("MFLD_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)
