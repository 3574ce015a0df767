"""Dense nonnegative-matrix numerics for leverage matrices.

Spectral radius with certified error bounds, per-bank leverage bounds,
closed-walk diagonals, and the linear fixed-point solve.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import SpectralConvergenceError

DEFAULT_TOL = 1e-10

# Matrices up to this size may be handed to the dense QR eigensolver when
# power iteration stagnates; above it we only use the per-component path.
_DENSE_FALLBACK_MAX_N = 512

# Stagnation check cadence and the minimum shrink factor the bracket must
# achieve per check window to keep iterating.
_STAGNATION_WINDOW = 50
_STAGNATION_SHRINK = 0.5


def check_matrix(m) -> np.ndarray:
    """Validate a square nonnegative finite matrix and return it as float64."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    if (a < 0).any():
        raise ValueError("matrix contains negative entries")
    return a


def _bracketed_power_iteration(a, tol, max_iter, v0=None):
    """Power iteration with a Collatz-Wielandt bracket on rho(a).

    Uses the shifted matrix a + shift*I (same Perron vector, rho shifted by
    `shift`), which is primitive whenever `a` is irreducible, so the bracket
    closes geometrically in that case.  The bracket [lo, hi] contains rho at
    every step, so on success the returned midpoint is within tol/2 of rho.

    Returns (rho, v, converged, width): the estimate, the last iterate, a
    convergence flag, and the final bracket width.
    """
    n = a.shape[0]
    scale = float(a.sum(axis=1).max())
    if scale == 0.0:
        return 0.0, np.full(n, 1.0 / n), True, 0.0
    b = a / scale
    shift = 0.5

    if v0 is None:
        v = np.full(n, 1.0 / n)
    else:
        v = np.asarray(v0, dtype=np.float64).copy()
        if v.shape != (n,) or (v <= 0).any() or not np.isfinite(v).all():
            v = np.full(n, 1.0 / n)
        else:
            v /= v.sum()

    # tolerance on the scaled problem
    stol = tol / scale
    width_mark = np.inf
    lo = 0.0
    hi = np.inf
    for it in range(max_iter):
        w = b @ v + shift * v
        ratios = w / v
        lo = float(ratios.min())
        hi = float(ratios.max())
        if hi - lo <= stol:
            mid = 0.5 * (lo + hi) - shift
            return max(mid, 0.0) * scale, w / w.sum(), True, (hi - lo) * scale
        v = w / w.sum()
        if (it + 1) % _STAGNATION_WINDOW == 0:
            width = hi - lo
            if width > _STAGNATION_SHRINK * width_mark:
                break
            width_mark = width
    mid = max(0.5 * (lo + hi) - shift, 0.0) * scale
    return mid, v, False, (hi - lo) * scale


def _per_component_radius(a, tol, max_iter):
    """rho(a) as the max spectral radius over strongly connected components.

    Singleton components contribute their diagonal entry (zero for leverage
    matrices), which makes DAG-derived matrices come out exactly zero.
    """
    n = a.shape[0]
    n_comp, labels = connected_components(csr_matrix(a), directed=True,
                                          connection="strong")
    best = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        if idx.size == 1:
            best = max(best, float(a[idx[0], idx[0]]))
            continue
        sub = a[np.ix_(idx, idx)]
        rho, v, ok, width = _bracketed_power_iteration(sub, tol, max_iter)
        if not ok:
            if idx.size <= _DENSE_FALLBACK_MAX_N:
                rho = float(np.abs(np.linalg.eigvals(sub)).max())
            else:
                raise SpectralConvergenceError(
                    "power iteration did not converge on a strongly connected "
                    f"component of size {idx.size}", last_vector=v,
                    residual=width)
        best = max(best, rho)
    return best


def spectral_radius(m, tol: float = DEFAULT_TOL, max_iter: int | None = None,
                    v0=None) -> float:
    """Spectral radius of a nonnegative matrix, accurate to within `tol`.

    Power iteration with a rigorous two-sided bracket does the work for
    irreducible matrices.  Reducible matrices (where the dominant eigenvalue
    can be defective and plain iteration stalls) are routed through a
    strongly-connected-component decomposition; components that still resist
    get the dense eigensolver when small enough.

    `v0` optionally warm-starts the iteration with a previous Perron-vector
    estimate; invalid vectors are silently replaced by the uniform start.

    Raises SpectralConvergenceError, carrying the last iterate and bracket
    residual, if no path converges.
    """
    a = check_matrix(m)
    n = a.shape[0]
    if n == 0:
        return 0.0
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 100 * n

    rho, v, ok, width = _bracketed_power_iteration(a, tol, max_iter, v0=v0)
    if ok:
        return rho
    return _per_component_radius(a, tol, max_iter)


def perron_vector_estimate(m, tol: float = DEFAULT_TOL,
                           max_iter: int | None = None, v0=None):
    """(rho, v) from the bracketed iteration; v feeds later warm starts.

    Falls back like spectral_radius when the whole-matrix iteration stalls;
    the returned vector is then the last whole-matrix iterate, which is still
    a serviceable warm start for nearby matrices.
    """
    a = check_matrix(m)
    n = a.shape[0]
    if max_iter is None:
        max_iter = 100 * n
    rho, v, ok, width = _bracketed_power_iteration(a, tol, max_iter, v0=v0)
    if ok:
        return rho, v
    return _per_component_radius(a, tol, max_iter), v


def leverage_bounds(m) -> tuple[float, float]:
    """(min, max) of per-bank interbank leverage, i.e. of the row sums.

    For an irreducible matrix the spectral radius lies inside this interval
    (Perron-Frobenius), so equal bounds pin it exactly.
    """
    a = check_matrix(m)
    if a.shape[0] == 0:
        return 0.0, 0.0
    sums = a.sum(axis=1)
    return float(sums.min()), float(sums.max())


def power_diagonal(m, k: int) -> np.ndarray:
    """Diagonal of m**k: entry i sums the weight products of all closed
    walks of length k at node i."""
    a = check_matrix(m)
    if k < 1:
        raise ValueError("k must be >= 1")
    p = np.linalg.matrix_power(a, k)
    d = np.diagonal(p).copy()
    if not np.isfinite(d).all():
        raise OverflowError(f"matrix power k={k} overflowed to non-finite values")
    return d


def linear_fixed_point(lambda_hat, h1, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Fixed point of the linearized loss dynamics: solve (I - L) h = h1.

    Refuses when rho(lambda_hat) >= 1, in which case no stable linear fixed
    point exists.
    """
    a = check_matrix(lambda_hat)
    b = np.asarray(h1, dtype=np.float64)
    if b.shape != (a.shape[0],):
        raise ValueError(f"shock vector shape {b.shape} does not match matrix "
                         f"dimension {a.shape[0]}")
    if (b < 0).any() or (b > 1).any():
        raise ValueError("initial shock entries must lie in [0, 1]")
    rho = spectral_radius(a, tol=tol)
    if rho >= 1.0 - tol:
        raise ValueError(f"no stable linear fixed point: spectral radius "
                         f"{rho:.6g} is not below 1")
    return np.linalg.solve(np.eye(a.shape[0]) - a, b)
