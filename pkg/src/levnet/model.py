"""Balance-sheet data model, leverage-matrix construction, default curves.

The balance-sheet CSV schema (header required, UTF-8, plain decimal point):

    bank_id,equity,interbank_assets,interbank_liabilities,external_assets,external_liabilities
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .spectral import check_matrix

BALANCE_COLUMNS = ("bank_id", "equity", "interbank_assets",
                   "interbank_liabilities", "external_assets",
                   "external_liabilities")

# Relative tolerance for the accounting identity
#   equity = external_assets - external_liabilities
#            + interbank_assets - interbank_liabilities
IDENTITY_RTOL = 1e-6


@dataclass(frozen=True)
class BalanceSheet:
    """One bank's aggregate balance sheet at time zero."""

    bank_id: str
    equity: float
    interbank_assets: float
    interbank_liabilities: float
    external_assets: float
    external_liabilities: float

    def __post_init__(self):
        if self.equity <= 0:
            raise ValueError(f"bank {self.bank_id!r}: equity must be positive, "
                             f"got {self.equity}")
        for name in ("interbank_assets", "interbank_liabilities",
                     "external_assets", "external_liabilities"):
            if getattr(self, name) < 0:
                raise ValueError(f"bank {self.bank_id!r}: {name} is negative")
        implied = (self.external_assets - self.external_liabilities
                   + self.interbank_assets - self.interbank_liabilities)
        scale = max(abs(self.equity), abs(implied), 1.0)
        if abs(implied - self.equity) > IDENTITY_RTOL * scale:
            raise ValueError(
                f"bank {self.bank_id!r}: balance-sheet identity violated, "
                f"equity={self.equity!r} but assets-minus-liabilities={implied!r}")

    @classmethod
    def from_totals(cls, bank_id, equity, interbank_assets,
                    interbank_liabilities, external_buffer=0.0):
        """Build a consistent sheet from equity and interbank totals only.

        External assets and liabilities are back-filled so the accounting
        identity holds exactly; `external_buffer` pads both sides.
        """
        net = equity + interbank_liabilities - interbank_assets
        external_liabilities = max(0.0, -net) + external_buffer
        external_assets = net + external_liabilities
        return cls(bank_id, equity, interbank_assets, interbank_liabilities,
                   external_assets, external_liabilities)


def load_balance_sheets(path) -> list[BalanceSheet]:
    """Read the balance-sheet CSV; raises naming every inconsistent bank."""
    sheets = []
    problems = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in BALANCE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for row in reader:
            try:
                sheets.append(BalanceSheet(
                    bank_id=row["bank_id"],
                    equity=float(row["equity"]),
                    interbank_assets=float(row["interbank_assets"]),
                    interbank_liabilities=float(row["interbank_liabilities"]),
                    external_assets=float(row["external_assets"]),
                    external_liabilities=float(row["external_liabilities"]),
                ))
            except ValueError as exc:
                problems.append(str(exc))
    if problems:
        raise ValueError(f"{path}: {len(problems)} invalid balance sheet(s):\n"
                         + "\n".join(problems))
    return sheets


def save_balance_sheets(sheets: Sequence[BalanceSheet], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BALANCE_COLUMNS)
        for s in sheets:
            writer.writerow([s.bank_id, repr(s.equity), repr(s.interbank_assets),
                             repr(s.interbank_liabilities),
                             repr(s.external_assets),
                             repr(s.external_liabilities)])


def build_leverage(exposures, sheets: Sequence[BalanceSheet]) -> np.ndarray:
    """Interbank leverage matrix: entry (i, j) = exposure_ij / equity_i."""
    a = check_matrix(exposures)
    n = a.shape[0]
    if len(sheets) != n:
        raise ValueError(f"{len(sheets)} balance sheets for a {n}x{n} "
                         "exposure matrix")
    equities = np.array([s.equity for s in sheets], dtype=np.float64)
    bad = np.flatnonzero(equities <= 0)
    if bad.size:
        names = [sheets[i].bank_id for i in bad]
        raise ValueError(f"nonpositive equity for bank(s) {names}")
    if np.diagonal(a).any():
        raise ValueError("exposure matrix has nonzero diagonal entries")
    return a / equities[:, None]


def adjust_recovery(lam, rho) -> np.ndarray:
    """Recovery-adjusted leverage: column j scaled by (1 - rho_j)."""
    a = check_matrix(lam)
    r = np.broadcast_to(np.asarray(rho, dtype=np.float64), (a.shape[0],))
    if (r < 0).any() or (r > 1).any():
        raise ValueError("recovery rates must lie in [0, 1]")
    return a * (1.0 - r)[None, :]


@dataclass(frozen=True)
class DefaultCurve:
    """Probability-of-default as a function of relative equity loss.

    Every member maps [0, 1] to [0, 1] with p(0)=0, p(1)=1, and is
    nondecreasing, convex and differentiable.  Families:

      linear       p(h) = h
      power        p(h) = h**alpha,                    alpha >= 1
      exponential  p(h) = expm1(beta*h) / expm1(beta), beta > 0
    """

    family: str
    param: float | None = None

    def __post_init__(self):
        if self.family == "linear":
            if self.param is not None:
                raise ValueError("linear curve takes no parameter")
        elif self.family == "power":
            if self.param is None or self.param < 1:
                raise ValueError("power curve needs alpha >= 1")
        elif self.family == "exponential":
            if self.param is None or self.param <= 0:
                raise ValueError("exponential curve needs beta > 0")
        else:
            raise ValueError(f"unknown curve family {self.family!r}")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def power(cls, alpha: float):
        return cls("power", float(alpha))

    @classmethod
    def exponential(cls, beta: float):
        return cls("exponential", float(beta))

    @property
    def slope_at_zero(self) -> float:
        """p'(0); convexity with the endpoint conditions forces it <= 1."""
        if self.family == "linear":
            return 1.0
        if self.family == "power":
            return 1.0 if self.param == 1.0 else 0.0
        return self.param / math.expm1(self.param)

    def raw(self, h):
        """Evaluate the family formula without the [0, 1] domain check.

        The formulas extend naturally to h > 1; the unclipped diagnostic
        dynamics relies on that.
        """
        x = np.asarray(h, dtype=np.float64)
        if self.family == "linear":
            out = x.copy()
        elif self.family == "power":
            out = x ** self.param
        else:
            out = np.expm1(self.param * x) / math.expm1(self.param)
        return out if out.ndim else float(out)

    def __call__(self, h):
        x = np.asarray(h, dtype=np.float64)
        if (x < 0).any() or (x > 1).any():
            raise ValueError("relative equity loss outside [0, 1]; "
                             "clamping is not performed")
        return self.raw(x)


def _as_curve_list(curves, n: int) -> list[DefaultCurve]:
    if isinstance(curves, DefaultCurve):
        return [curves] * n
    curves = list(curves)
    if len(curves) != n:
        raise ValueError(f"{len(curves)} curves for {n} banks")
    return curves


def curve_slopes(curves, n: int) -> np.ndarray:
    """Vector of p'_j(0) for curves given per bank or shared."""
    return np.array([c.slope_at_zero for c in _as_curve_list(curves, n)])


def eval_curves(curves, h, raw: bool = False) -> np.ndarray:
    """Apply curve j to h[j] for each bank."""
    h = np.asarray(h, dtype=np.float64)
    cs = _as_curve_list(curves, h.shape[0])
    if all(c is cs[0] for c in cs):
        return cs[0].raw(h) if raw else cs[0](h)
    out = np.empty_like(h)
    for j, c in enumerate(cs):
        out[j] = c.raw(h[j]) if raw else c(h[j])
    return out


def tilde_matrix(lambda_hat, curves) -> np.ndarray:
    """Slope-weighted leverage: column j scaled by p'_j(0).

    Its spectral radius never exceeds that of lambda_hat, since every
    slope is at most 1.
    """
    a = check_matrix(lambda_hat)
    return a * curve_slopes(curves, a.shape[0])[None, :]


def check_exposures_consistent(exposures, sheets: Sequence[BalanceSheet],
                               rtol: float = 1e-6) -> None:
    """Verify row sums match interbank assets and column sums liabilities."""
    a = check_matrix(exposures)
    rows = a.sum(axis=1)
    cols = a.sum(axis=0)
    for i, s in enumerate(sheets):
        if abs(rows[i] - s.interbank_assets) > rtol * (1.0 + s.interbank_assets):
            raise ValueError(f"bank {s.bank_id!r}: exposure row sum {rows[i]!r} "
                             f"!= interbank assets {s.interbank_assets!r}")
        if abs(cols[i] - s.interbank_liabilities) > rtol * (1.0 + s.interbank_liabilities):
            raise ValueError(f"bank {s.bank_id!r}: exposure column sum {cols[i]!r}"
                             f" != interbank liabilities {s.interbank_liabilities!r}")


def synthetic_balance_sheets(n: int, mean_leverage: float, seed: int,
                             n_pure_borrowers: int | None = None,
                             n_pure_lenders: int | None = None,
                             equity_sigma: float = 0.8,
                             max_share: float = 0.6) -> list[BalanceSheet]:
    """Generate a consistent synthetic bank population.

    Equities are log-normal.  Interbank assets are drawn so the average
    interbank leverage across banks equals `mean_leverage` exactly;
    liabilities are drawn at comparable scale and rescaled so total assets
    equal total liabilities (flow conservation).  A few banks are made pure
    borrowers (zero interbank assets) and pure lenders (zero liabilities):
    real populations contain both, and DAG-supported reconstruction needs
    at least one of each (every finite DAG has a source and a sink).

    No bank may hold more than `max_share` of the combined interbank
    market: a bank with assets + liabilities above the grand total cannot
    place its business without lending to itself, which would make even
    the complete exposure network infeasible.
    """
    if n < 4:
        raise ValueError("need at least 4 banks")
    if not 2.0 / n <= max_share < 1.0:
        raise ValueError("max_share must lie in [2/n, 1)")
    if n_pure_borrowers is None:
        n_pure_borrowers = max(1, n // 10)
    if n_pure_lenders is None:
        n_pure_lenders = max(1, n // 10)
    if n_pure_borrowers + n_pure_lenders >= n:
        raise ValueError("too many pure borrowers/lenders")
    rng = np.random.default_rng(seed)
    equity = np.exp(rng.normal(0.0, equity_sigma, n)) * 100.0

    borrowers = np.arange(n_pure_borrowers)
    lenders = np.arange(n - n_pure_lenders, n)

    lev = rng.gamma(shape=4.0, scale=mean_leverage / 4.0, size=n)
    lev[borrowers] = 0.0
    # pin the average leverage exactly on the lending banks
    lev *= mean_leverage * n / lev.sum()
    assets = lev * equity

    liab = np.exp(rng.normal(0.0, 0.5, n)) * equity
    liab[lenders] = 0.0
    liab *= assets.sum() / liab.sum()

    idx = np.arange(n)
    for _ in range(200):
        total = assets.sum()
        share = (assets + liab) / total
        i = int(np.argmax(share))
        if share[i] <= max_share:
            break
        # shrink the dominant bank, re-inflate the rest, keep both pins
        others_lend = (assets > 0) & (idx != i)
        others_borrow = (liab > 0) & (idx != i)
        new_lev_i = 0.7 * assets[i] / equity[i]
        lev = assets / equity
        lev[others_lend] *= (mean_leverage * n - new_lev_i) \
            / lev[others_lend].sum()
        lev[i] = new_lev_i
        assets = lev * equity
        liab[i] *= 0.7
        liab[others_borrow] *= (assets.sum() - liab[i]) \
            / liab[others_borrow].sum()
    else:
        raise ValueError("could not cap the dominant bank's market share; "
                         "lower equity_sigma or raise max_share")

    return [BalanceSheet.from_totals(f"B{i:03d}", float(equity[i]),
                                     float(assets[i]), float(liab[i]),
                                     external_buffer=float(equity[i]))
            for i in range(n)]
