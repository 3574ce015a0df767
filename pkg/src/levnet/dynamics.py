"""Distress-propagation dynamics and the three-regime stability classifier.

The state h holds each bank's relative equity loss.  One update reads

    h_i(t) = h_i(1) + sum_j lambda_hat_ij * p_j(h_j(t-1))

clipped into [0, 1] in the faithful mode; the unclipped diagnostic mode
exposes the raw growth the spectral criteria describe.  Once a bank's loss
reaches 1 it stays there: p(1) = 1 and the map is monotone, so the clip is
absorbing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import curve_slopes, eval_curves
from .spectral import DEFAULT_TOL, check_matrix, spectral_radius

STABLE = "stable"
UNSTABLE = "unstable"
INDETERMINATE = "indeterminate"

# unclipped iterates beyond this are called diverged
_DIVERGE_CAP = 1e12


@dataclass(frozen=True)
class DistressState:
    """Relative equity losses at one step of the propagation."""

    h: np.ndarray
    t: int


@dataclass(frozen=True)
class RegimeLabel:
    """Stability verdict together with the two spectral radii behind it."""

    regime: str
    lambda_hat_max: float
    lambda_tilde_max: float


@dataclass
class SimulationResult:
    outcome: str                       # converged | ceiling | diverged | undecided
    final: np.ndarray
    steps: int
    trajectory: np.ndarray | None = None   # shape (steps+1, n) when recorded

    @property
    def fixed_point(self):
        return self.final if self.outcome in ("converged", "ceiling") else None


def _check_shock(h1, n):
    b = np.asarray(h1, dtype=np.float64)
    if b.shape != (n,):
        raise ValueError(f"shock shape {b.shape} does not match {n} banks")
    if (b < 0).any() or (b > 1).any():
        raise ValueError("shock entries must lie in [0, 1]")
    return b


def step(state: DistressState, lambda_hat, curves, h1,
         clip: bool = True) -> DistressState:
    """Advance the propagation by one step."""
    a = check_matrix(lambda_hat)
    n = a.shape[0]
    shock = _check_shock(h1, n)
    h = np.asarray(state.h, dtype=np.float64)
    if h.shape != (n,):
        raise ValueError(f"state dimension {h.shape} does not match matrix {n}")
    new = shock + a @ eval_curves(curves, h, raw=not clip)
    if clip:
        new = np.minimum(new, 1.0)
    return DistressState(h=new, t=state.t + 1)


def default_max_steps(lambda_hat_max: float, n: int) -> int:
    """Step budget scaled by the geometric convergence rate 1 - rho."""
    if lambda_hat_max < 1.0:
        return min(int(10 * n * np.ceil(1.0 / (1.0 - lambda_hat_max))), 10**6)
    return 10**5


def simulate(lambda_hat, curves, h1, tol: float = DEFAULT_TOL,
             max_steps: int | None = None, clip: bool = True,
             record: bool = False) -> SimulationResult:
    """Iterate the propagation from h(1) = h1 until it settles or blows up.

    Outcomes: `converged` when successive iterates differ by less than tol
    in max norm with the clip inactive; `ceiling` when the only remaining
    growth is absorbed by the h = 1 boundary; `diverged` (unclipped mode
    only) when iterates exceed a fixed cap; `undecided` when the step
    budget runs out first.
    """
    a = check_matrix(lambda_hat)
    n = a.shape[0]
    shock = _check_shock(h1, n)
    if max_steps is None:
        max_steps = default_max_steps(spectral_radius(a, tol=tol), n)

    h = shock.copy()
    traj = [h.copy()] if record else None
    outcome = "undecided"
    steps = 0
    for steps in range(1, max_steps + 1):
        raw = shock + a @ eval_curves(curves, h, raw=not clip)
        new = np.minimum(raw, 1.0) if clip else raw
        if record:
            traj.append(new.copy())
        delta = float(np.abs(new - h).max())
        h = new
        if not clip and (not np.isfinite(h).all() or np.abs(h).max() > _DIVERGE_CAP):
            outcome = "diverged"
            break
        if delta < tol:
            clipped_growth = clip and bool((raw > 1.0 + tol).any())
            outcome = "ceiling" if clipped_growth else "converged"
            break
    return SimulationResult(outcome=outcome, final=h, steps=steps,
                            trajectory=np.array(traj) if record else None)


def classify(lambda_hat, curves, tol: float = DEFAULT_TOL) -> RegimeLabel:
    """Three-regime stability verdict from the two spectral radii.

    Stable when lambda_hat_max < 1 (no default curve can destabilize);
    unstable when lambda_tilde_max > 1 (every fixed point repels);
    indeterminate in between, including radii within tol of the boundary.
    """
    a = check_matrix(lambda_hat)
    lam_hat = spectral_radius(a, tol=tol)
    slopes = curve_slopes(curves, a.shape[0])
    lam_tilde = spectral_radius(a * slopes[None, :], tol=tol)
    if lam_hat < 1.0 - tol:
        regime = STABLE
    elif lam_tilde > 1.0 + tol:
        regime = UNSTABLE
    else:
        regime = INDETERMINATE
    return RegimeLabel(regime=regime, lambda_hat_max=lam_hat,
                       lambda_tilde_max=lam_tilde)


def write_trajectory_csv(result: SimulationResult, path) -> None:
    """Dump a recorded trajectory as t, h_1..h_n rows."""
    if result.trajectory is None:
        raise ValueError("simulation was run without record=True")
    n = result.trajectory.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t," + ",".join(f"h_{i+1}" for i in range(n)) + "\n")
        for t, row in enumerate(result.trajectory):
            fh.write(str(t + 1) + "," + ",".join(repr(x) for x in row) + "\n")
