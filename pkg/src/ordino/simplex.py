"""Geometry of the probability simplex: unimodality tests and projections.

Mode indices and labels are 1-based throughout the package (they name
ordinal categories ``1..K``).  Array-valued routines accept either a single
vector of shape ``(K,)`` or a batch of shape ``(n, K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ordino.errors import ConvergenceError, DimensionError, NumericError

#: Largest Euclidean distance between two points of the simplex.
SIMPLEX_DIAMETER = math.sqrt(2.0)

DEFAULT_TOL = 1e-9
DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_ITER = 10_000
# distances closer than this count as ties when picking the minimizing mode
_MODE_TIE = 1e-12


def as_pmf(p, atol: float = 1e-9) -> np.ndarray:
    """Validate ``p`` as a PMF (or batch of PMFs) with ``K >= 3``."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim not in (1, 2):
        raise DimensionError(f"expected a vector or a matrix, got shape {arr.shape}")
    if arr.shape[-1] < 3:
        raise DimensionError(f"need K >= 3 classes, got K={arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("PMF contains non-finite entries")
    if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12):
        raise ValueError("PMF entries must lie in [0, 1]")
    if np.any(np.abs(arr.sum(axis=-1) - 1.0) > atol):
        raise ValueError("PMF entries must sum to 1")
    return arr


def mode_set(p, tol: float = DEFAULT_TOL) -> set[int]:
    """Return every (1-based) index whose value is within ``tol`` of the maximum."""
    arr = as_pmf(p)
    if arr.ndim != 1:
        raise DimensionError("mode_set expects a single PMF")
    return {int(i) + 1 for i in np.flatnonzero(arr >= arr.max() - tol)}


def unimodal_mask(P, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized unimodality test.

    A row is unimodal iff for every index ``M`` within ``tol`` of the row
    maximum the entries are nondecreasing up to ``M`` and nonincreasing from
    ``M`` on, each comparison allowing slack ``tol``.
    """
    arr = np.atleast_2d(np.asarray(P, dtype=float))
    if arr.shape[-1] < 3:
        raise DimensionError(f"need K >= 3 classes, got K={arr.shape[-1]}")
    d = np.diff(arr, axis=1)
    n, K = arr.shape
    rises = d >= -tol
    falls = d <= tol
    # prefix_ok[:, m]: entries 0..m nondecreasing; suffix_ok[:, m]: entries m..K-1 nonincreasing
    prefix_ok = np.ones((n, K), dtype=bool)
    prefix_ok[:, 1:] = np.logical_and.accumulate(rises, axis=1)
    suffix_ok = np.ones((n, K), dtype=bool)
    suffix_ok[:, :-1] = np.logical_and.accumulate(falls[:, ::-1], axis=1)[:, ::-1]
    is_mode = arr >= arr.max(axis=1, keepdims=True) - tol
    return np.all(~is_mode | (prefix_ok & suffix_ok), axis=1)


def is_unimodal(p, tol: float = DEFAULT_TOL) -> bool:
    arr = as_pmf(p)
    if arr.ndim != 1:
        raise DimensionError("is_unimodal expects a single PMF; use unimodal_mask for batches")
    return bool(unimodal_mask(arr, tol)[0])


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold)."""
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericError("cannot project a non-finite vector")
    single = arr.ndim == 1
    V = np.atleast_2d(arr)
    K = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    ind = np.arange(1, K + 1)
    cond = U - css / ind > 0
    # number of strictly positive coordinates in the solution
    rho = K - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(V.shape[0]), rho - 1] / rho
    out = np.maximum(V - theta[:, None], 0.0)
    return out[0] if single else out


def pava_nondecreasing(y, w=None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    values: list[float] = []
    weights: list[float] = []
    counts: list[int] = []
    for yi, wi in zip(y, w):
        values.append(float(yi))
        weights.append(float(wi))
        counts.append(1)
        while len(values) > 1 and values[-2] > values[-1]:
            wsum = weights[-2] + weights[-1]
            merged = (values[-2] * weights[-2] + values[-1] * weights[-1]) / wsum
            c = counts[-2] + counts[-1]
            del values[-1], weights[-1], counts[-1]
            values[-1], weights[-1], counts[-1] = merged, wsum, c
    return np.repeat(values, counts)


def isotonic_nondecreasing(Y) -> np.ndarray:
    """Row-wise unweighted nondecreasing least-squares fit.

    Uses the max-min characterization
    ``x_i = max_{j<=i} min_{k>=i} mean(y_j..y_k)``, which gives the same
    solution as pool-adjacent-violators but vectorizes over rows.
    """
    Y = np.asarray(Y, dtype=float)
    single = Y.ndim == 1
    Y = np.atleast_2d(Y)
    n, L = Y.shape
    if L == 1:
        return Y[0].copy() if single else Y.copy()
    S = np.zeros((n, L + 1))
    np.cumsum(Y, axis=1, out=S[:, 1:])
    j = np.arange(L)[:, None]
    k = np.arange(L)[None, :]
    length = np.where(k >= j, k - j + 1, 1)
    means = (S[:, None, 1:] - S[:, :-1, None]) / length
    means = np.where(k >= j, means, np.inf)
    tail_min = np.minimum.accumulate(means[:, :, ::-1], axis=2)[:, :, ::-1]
    tail_min = np.where(k >= j, tail_min, -np.inf)
    out = tail_min.max(axis=1)
    return out[0] if single else out


def _dykstra_fixed_mode(V: np.ndarray, m: int, tol: float, max_iter: int):
    """Dykstra's alternating projections onto prefix cone, suffix cone and simplex.

    ``m`` is the 0-based mode.  Returns ``(X, residual)`` per row.
    """
    n, K = V.shape
    X = V.copy()
    incr_a = np.zeros_like(V)
    incr_b = np.zeros_like(V)
    incr_c = np.zeros_like(V)
    residual = np.full(n, np.inf)
    active = np.arange(n)
    for _ in range(max_iter):
        x = X[active]
        t = x + incr_a[active]
        y = t.copy()
        y[:, : m + 1] = isotonic_nondecreasing(t[:, : m + 1])
        incr_a[active] = t - y
        t = y + incr_b[active]
        z = t.copy()
        z[:, m:] = -isotonic_nondecreasing(-t[:, m:])
        incr_b[active] = t - z
        t = z + incr_c[active]
        x_new = project_to_simplex(t)
        incr_c[active] = t - x_new
        step = np.linalg.norm(x_new - x, axis=1)
        X[active] = x_new
        residual[active] = step
        active = active[step >= tol]
        if active.size == 0:
            return X, residual
    raise ConvergenceError(
        f"Dykstra projection (mode {m + 1}) did not converge in {max_iter} iterations",
        best=X,
        residual=float(residual.max()),
    )


def project_unimodal_fixed_mode(
    v, M: int, tol: float = DYKSTRA_TOL, max_iter: int = DYKSTRA_MAX_ITER
) -> np.ndarray:
    """Project onto the PMFs that are nondecreasing up to ``M`` and nonincreasing after.

    ``M`` is 1-based.  Batched input is projected row by row with a common mode.
    """
    arr = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericError("cannot project a non-finite vector")
    single = arr.ndim == 1
    V = np.atleast_2d(arr)
    K = V.shape[1]
    if K < 3:
        raise DimensionError(f"need K >= 3 classes, got K={K}")
    if not 1 <= M <= K:
        raise ValueError(f"mode must lie in 1..{K}, got {M}")
    X, _ = _dykstra_fixed_mode(V, M - 1, tol, max_iter)
    return X[0] if single else X


@dataclass(frozen=True)
class UnimodalProjection:
    """Nearest unimodal PMF, its Euclidean distance and the mode it was fitted with."""

    nearest: np.ndarray
    distance: float
    mode: int


def hausdorff_batch(P, tol: float = DYKSTRA_TOL, max_iter: int = DYKSTRA_MAX_ITER):
    """Distances from each row of ``P`` to the set of unimodal PMFs.

    Returns ``(distances, modes, nearest)``; ``modes`` are 1-based and ties
    go to the smallest mode.  Rows that already are unimodal get distance 0.
    """
    P = np.atleast_2d(as_pmf(P))
    n, K = P.shape
    dist = np.zeros(n)
    nearest = P.copy()
    modes = np.argmax(P, axis=1) + 1
    todo = np.flatnonzero(~unimodal_mask(P))
    if todo.size == 0:
        return dist, modes, nearest
    sub = P[todo]
    best_d = np.full(todo.size, np.inf)
    best_x = np.empty_like(sub)
    best_m = np.zeros(todo.size, dtype=int)
    for m in range(K):
        X, _ = _dykstra_fixed_mode(sub, m, tol, max_iter)
        d = np.linalg.norm(X - sub, axis=1)
        better = d < best_d - _MODE_TIE
        best_d[better] = d[better]
        best_x[better] = X[better]
        best_m[better] = m + 1
    dist[todo] = best_d
    nearest[todo] = best_x
    modes[todo] = best_m
    return dist, modes, nearest


def hausdorff_to_unimodal(p) -> UnimodalProjection:
    """Distance from ``p`` to the unimodal set, with the minimizing point and mode."""
    arr = as_pmf(p)
    if arr.ndim != 1:
        raise DimensionError("hausdorff_to_unimodal expects a single PMF; use hausdorff_batch")
    d, m, q = hausdorff_batch(arr[None, :])
    if d[0] == 0.0:
        m0 = min(mode_set(arr))
        return UnimodalProjection(nearest=arr.copy(), distance=0.0, mode=m0)
    return UnimodalProjection(nearest=q[0], distance=float(d[0]), mode=int(m[0]))


def is_approx_unimodal(p, eps: float) -> bool:
    """True iff ``p`` lies within Euclidean distance ``eps`` of a unimodal PMF."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps >= SIMPLEX_DIAMETER:
        as_pmf(p)
        return True
    return hausdorff_to_unimodal(p).distance <= eps
