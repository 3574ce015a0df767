"""RAS / iterative proportional fitting on a fixed support.

Balancing starts from all-ones on the support, which converges to the
maximum-entropy exposure matrix matching the marginals.  The accumulated
row and column scaling factors are kept (in log space, since their spread
can be extreme on hard supports) on the solution object: a matrix produced
this way is outer(row_factors, col_factors) restricted to the support, and
seeding a newly opened edge with that product makes the warm-started
rebalance land on exactly the same matrix a cold start would find on the
enlarged support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RasConvergenceError, RasInfeasibleError

DEFAULT_RAS_TOL = 1e-9
DEFAULT_MAX_SWEEPS = 10**5

# New-edge seeds never start below this fraction of the grand total, so
# multiplicative scaling can always lift them.
_SEED_FLOOR_FRACTION = 1e-12

# Residuals decrease monotonically; when a whole window of sweeps shaves
# off less than a fraction (1 - _STALL_RATIO), the marginals are stuck at a
# positive limit (infeasible support) and waiting out the budget is futile.
_STALL_WINDOW = 128
_STALL_RATIO = 0.99


@dataclass
class RasProblem:
    """Support mask plus per-bank interbank asset / liability targets."""

    support: np.ndarray
    row_targets: np.ndarray
    col_targets: np.ndarray
    tol: float = DEFAULT_RAS_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=bool)
        self.row_targets = np.asarray(self.row_targets, dtype=np.float64)
        self.col_targets = np.asarray(self.col_targets, dtype=np.float64)
        n = self.support.shape[0]
        if self.support.shape != (n, n):
            raise ValueError("support must be square")
        if self.row_targets.shape != (n,) or self.col_targets.shape != (n,):
            raise ValueError("marginal lengths do not match support")
        if (self.row_targets < 0).any() or (self.col_targets < 0).any():
            raise ValueError("marginals must be nonnegative")
        if np.diagonal(self.support).any():
            raise ValueError("support must have a zero diagonal")
        total_r = self.row_targets.sum()
        total_c = self.col_targets.sum()
        if abs(total_r - total_c) > 1e-6 * max(total_r, total_c, 1.0):
            raise ValueError(f"marginals are not conserved: row total {total_r!r}"
                             f" != column total {total_c!r}")

    @property
    def n(self) -> int:
        return self.support.shape[0]

    @property
    def grand_total(self) -> float:
        return float(self.row_targets.sum())

    def check_feasible(self) -> None:
        """Fail fast when a positive target has no supported edge at all."""
        rows_without = np.flatnonzero((self.row_targets > 0)
                                      & ~self.support.any(axis=1))
        if rows_without.size:
            raise RasInfeasibleError(
                f"bank(s) {rows_without.tolist()} have positive interbank "
                "assets but no supported outgoing edge")
        cols_without = np.flatnonzero((self.col_targets > 0)
                                      & ~self.support.any(axis=0))
        if cols_without.size:
            raise RasInfeasibleError(
                f"bank(s) {cols_without.tolist()} have positive interbank "
                "liabilities but no supported incoming edge")


@dataclass
class RasSolution:
    """Balanced matrix plus the log-space diagonal scalings that built it.

    matrix[i, j] == exp(log_row_factors[i] + log_col_factors[j]) on the
    support (log factors are -inf on zero-target rows and columns).
    """

    matrix: np.ndarray
    log_row_factors: np.ndarray
    log_col_factors: np.ndarray
    support: np.ndarray
    sweeps: int
    residual: float
    meta: dict = field(default_factory=dict)

    @property
    def row_factors(self) -> np.ndarray:
        return np.exp(self.log_row_factors)

    @property
    def col_factors(self) -> np.ndarray:
        return np.exp(self.log_col_factors)


def _residuals(x, problem):
    rows = x.sum(axis=1)
    cols = x.sum(axis=0)
    row_res = np.abs(rows - problem.row_targets) / (1.0 + problem.row_targets)
    col_res = np.abs(cols - problem.col_targets) / (1.0 + problem.col_targets)
    return float(row_res.max()), float(col_res.max())


def _normalize_logs(la, lb):
    """Shift the free joint scale so row factors center at log 1."""
    finite = la[np.isfinite(la)]
    if finite.size:
        shift = finite.mean()
        la -= shift
        lb += shift


def _balance(x0, la0, lb0, problem) -> RasSolution:
    """Column-then-row sweeps from x0, tracking log scaling factors.

    Ending on the row pass leaves row sums (and thus per-bank leverages)
    exact to rounding at every sweep boundary.
    """
    x = x0.copy()
    la = la0.copy()
    lb = lb0.copy()
    r = problem.row_targets
    c = problem.col_targets
    worst = np.inf
    window_mark = np.inf
    with np.errstate(divide="ignore"):
        for sweep in range(1, problem.max_sweeps + 1):
            cols = x.sum(axis=0)
            col_f = np.divide(c, cols, out=np.zeros_like(c), where=cols > 0)
            x *= col_f[None, :]
            lb += np.log(col_f)

            rows = x.sum(axis=1)
            row_f = np.divide(r, rows, out=np.zeros_like(r), where=rows > 0)
            x *= row_f[:, None]
            la += np.log(row_f)

            row_res, col_res = _residuals(x, problem)
            worst = max(row_res, col_res)
            if worst <= problem.tol:
                _normalize_logs(la, lb)
                return RasSolution(matrix=x, log_row_factors=la,
                                   log_col_factors=lb,
                                   support=problem.support.copy(),
                                   sweeps=sweep, residual=worst)
            if sweep % _STALL_WINDOW == 0:
                if worst > _STALL_RATIO * window_mark:
                    raise RasConvergenceError(
                        f"RAS stalled after {sweep} sweeps with marginal "
                        f"residual {worst:.3e}: the residual stopped "
                        "improving, so the support cannot carry these "
                        "marginals", residual=worst)
                window_mark = worst
    raise RasConvergenceError(
        f"RAS did not reach tol={problem.tol} within {problem.max_sweeps} "
        f"sweeps (worst marginal residual {worst:.3e}); the support is "
        "likely infeasible for these marginals", residual=worst)


def ras_balance(problem: RasProblem) -> RasSolution:
    """Maximum-entropy exposures on the support matching the marginals."""
    problem.check_feasible()
    x0 = problem.support.astype(np.float64)
    zeros = np.zeros(problem.n)
    return _balance(x0, zeros, zeros, problem)


def rebalance_after_edge(prev: RasSolution, new_edge: tuple[int, int],
                         row_targets, col_targets,
                         tol: float = DEFAULT_RAS_TOL,
                         max_sweeps: int = DEFAULT_MAX_SWEEPS) -> RasSolution:
    """Re-balance after opening one new edge, warm-started from `prev`.

    The new entry is seeded at the product of the accumulated scaling
    factors (floored at a tiny fraction of the grand total), which keeps
    the start diagonally equivalent to all-ones on the enlarged support:
    the result matches a cold start there, while needing far fewer sweeps.
    Marginals must be the ones `prev` was balanced against.
    """
    i, j = new_edge
    if i == j:
        raise ValueError("cannot open a diagonal entry")
    if prev.support[i, j]:
        raise ValueError(f"edge {new_edge} is already in the support")
    support = prev.support.copy()
    support[i, j] = True
    problem = RasProblem(support=support, row_targets=row_targets,
                         col_targets=col_targets, tol=tol,
                         max_sweeps=max_sweeps)
    problem.check_feasible()

    x0 = prev.matrix.copy()
    if problem.row_targets[i] > 0 and problem.col_targets[j] > 0:
        seed = float(np.exp(prev.log_row_factors[i] + prev.log_col_factors[j]))
        seed = max(seed, _SEED_FLOOR_FRACTION * problem.grand_total)
    else:
        seed = 0.0
    x0[i, j] = seed
    return _balance(x0, prev.log_row_factors, prev.log_col_factors, problem)
