"""Structural analysis: DAG tests, unstable-cycle witnesses, toy graphs.

A *combined* unstable cycle is a node i and length k with (L^k)_ii > 1:
the closed walks of length k at i jointly amplify shocks, which certifies
a spectral radius above one even when every individual cycle is weak.
An *individual* witness is a single simple cycle whose edge-weight product
already exceeds one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import islice

import networkx as nx
import numpy as np

from .generators import WeightedDigraph
from .spectral import check_matrix, power_diagonal, spectral_radius

INDIVIDUAL = "individual"
COMBINED = "combined"


@dataclass(frozen=True)
class CycleWitness:
    kind: str
    node: int
    length: int
    value: float
    cycle: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "node": self.node, "length": self.length,
             "value": self.value}
        if self.cycle is not None:
            d["cycle"] = list(self.cycle)
        return d


def is_dag(g: WeightedDigraph) -> bool:
    """True iff the graph admits a topological order (no directed cycle)."""
    indeg = np.zeros(g.n, dtype=np.int64)
    np.add.at(indeg, g.dst, 1)
    succ: list[list[int]] = [[] for _ in range(g.n)]
    for s, d, _ in g.edges():
        succ[s].append(d)
    stack = [i for i in range(g.n) if indeg[i] == 0]
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for v in succ[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    return seen == g.n


@dataclass
class WitnessReport:
    witnesses: list[CycleWitness] = field(default_factory=list)
    truncated: bool = False

    def to_dict(self) -> dict:
        return {"truncated": self.truncated,
                "witnesses": [w.to_dict() for w in self.witnesses]}


def find_unstable_cycles(lam, k_max: int = 8, simple_cycle_max_len: int = 8,
                         cycle_budget: int = 10**6) -> WitnessReport:
    """All combined witnesses for k <= k_max, plus individual witnesses
    from bounded simple-cycle enumeration.

    The matrix-power check is complete up to k_max; the enumeration is
    best-effort and flags the report as truncated when its budget runs out.
    Every witness certifies that the spectral radius exceeds one.
    """
    a = check_matrix(lam)
    report = WitnessReport()
    for k in range(1, k_max + 1):
        diag = power_diagonal(a, k)
        for i in np.flatnonzero(diag > 1.0):
            report.witnesses.append(CycleWitness(
                kind=COMBINED, node=int(i), length=k, value=float(diag[i])))

    g = nx.DiGraph()
    g.add_nodes_from(range(a.shape[0]))
    for i, j in zip(*np.nonzero(a)):
        g.add_edge(int(i), int(j))
    visited = 0
    gen = nx.simple_cycles(g, length_bound=simple_cycle_max_len)
    for cycle in islice(gen, cycle_budget + 1):
        visited += 1
        if visited > cycle_budget:
            report.truncated = True
            break
        prod = 1.0
        for u, v in zip(cycle, cycle[1:] + cycle[:1]):
            prod *= a[u, v]
        if prod > 1.0:
            report.witnesses.append(CycleWitness(
                kind=INDIVIDUAL, node=int(cycle[0]), length=len(cycle),
                value=float(prod), cycle=tuple(int(x) for x in cycle)))
    return report


# ---------------------------------------------------------------------------
# small worked topologies

def build_butterfly(omega: float) -> WeightedDigraph:
    """Two directed 3-cycles sharing node 0, every edge weighted omega.

    The shared node sits on two length-3 closed walks, so (L^3)_00 equals
    2*omega**3 and the spectral radius is 2**(1/3) * omega: the combined
    cycle destabilizes for omega > 2**(-1/3) although each individual
    cycle needs omega > 1.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    edges = [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)]
    src, dst = zip(*edges)
    return WeightedDigraph(n=5, src=np.array(src), dst=np.array(dst),
                           weight=np.full(len(edges), float(omega)),
                           meta={"ensemble": "butterfly", "omega": omega})


def build_core_periphery_example(omega: float, n_core: int = 4,
                                 n_in: int = 3, n_out: int = 3) -> WeightedDigraph:
    """Complete core plus periphery nodes wired one way only.

    `n_in` periphery nodes lend to every core bank (edges into the core);
    `n_out` periphery nodes borrow from every core bank (edges out of it).
    All weights equal omega, so the only cycles live in the core and the
    spectral radius is (n_core - 1) * omega.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if n_core < 2:
        raise ValueError("need at least 2 core nodes")
    n = n_core + n_in + n_out
    src, dst = [], []
    for i in range(n_core):
        for j in range(n_core):
            if i != j:
                src.append(i)
                dst.append(j)
    for p in range(n_core, n_core + n_in):
        for c in range(n_core):
            src.append(p)
            dst.append(c)
    for p in range(n_core + n_in, n):
        for c in range(n_core):
            src.append(c)
            dst.append(p)
    return WeightedDigraph(n=n, src=np.array(src), dst=np.array(dst),
                           weight=np.full(len(src), float(omega)),
                           meta={"ensemble": "core_periphery_example",
                                 "omega": omega, "n_core": n_core,
                                 "n_in": n_in, "n_out": n_out})


# Edge sets of the five-panel toy sequence.  The published figure gives the
# topology only pictorially; this reconstruction follows the caption's
# narrative: (a) a DAG, (b) one added edge closes the first cycles,
# (c) another closes one more, (d) two edges into the sink add no cycle and
# dilute the existing ones, (e) one more edge closes a cycle again.  Node
# leverages are frozen at their panel-(a) values (out-degree * omega) and
# spread uniformly over each node's current out-edges.
_FIG3_BASE = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2)]
_FIG3_ADDITIONS = [
    [(2, 0)],          # b: cycles 0-1-2-0 and 0-2-0 appear
    [(3, 1)],          # c: cycle 1-2-3-1 appears
    [(1, 4), (2, 4)],  # d: node 4 is a sink, no new cycle
    [(1, 0)],          # e: cycle 0-1-0 appears
]


def build_fig3_sequence(omega: float) -> list[WeightedDigraph]:
    """Five graphs whose largest eigenvalue oscillates as edges are added.

    Per-node leverage is constant across all panels; the eigenvalue rises
    when an addition closes a new cycle and falls when it merely spreads a
    bank's lending thinner.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    n = 5
    base_out_degree = np.zeros(n, dtype=np.int64)
    for s, _ in _FIG3_BASE:
        base_out_degree[s] += 1
    leverage = base_out_degree * float(omega)

    panels = []
    edges = list(_FIG3_BASE)
    for step in range(5):
        if step > 0:
            edges = edges + _FIG3_ADDITIONS[step - 1]
        out_degree = np.zeros(n, dtype=np.int64)
        for s, _ in edges:
            out_degree[s] += 1
        src = np.array([s for s, _ in edges])
        dst = np.array([d for _, d in edges])
        weight = leverage[src] / out_degree[src]
        panels.append(WeightedDigraph(
            n=n, src=src, dst=dst, weight=weight,
            meta={"ensemble": "fig3", "panel": "abcde"[step], "omega": omega}))
    return panels


def fig3_omega_window() -> tuple[float, float]:
    """Open interval of omega for which panel d is stable and panel e is not.

    All panel eigenvalues scale linearly in omega, so the window follows
    from the unit-omega values of panels d and e.
    """
    panels = build_fig3_sequence(1.0)
    rho_d = spectral_radius(panels[3].to_matrix())
    rho_e = spectral_radius(panels[4].to_matrix())
    return 1.0 / rho_e, 1.0 / rho_d
