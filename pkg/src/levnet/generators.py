"""Seeded construction of the five directed-graph ensembles.

Every generator derives two independent RNG streams from its seed, one for
topology and one for weights, so reassigning weights can never perturb the
structure draw.  Identical (parameters, seed) always reproduce the graph
bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GenerationError


def split_rngs(seed, n_streams: int = 2):
    """Independent child generators derived deterministically from `seed`."""
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n_streams)]


# ---------------------------------------------------------------------------
# weight samplers: callables (rng, size) -> positive float array

def exponential_weights(mean: float):
    if mean <= 0:
        raise ValueError("weight mean must be positive")

    def sample(rng, size):
        return rng.exponential(mean, size)

    sample.description = f"exponential(mean={mean})"
    return sample


def constant_weights(value: float):
    if value <= 0:
        raise ValueError("weight value must be positive")

    def sample(rng, size):
        return np.full(size, float(value))

    sample.description = f"constant({value})"
    return sample


def uniform_weights(low: float, high: float):
    if not 0 < low < high:
        raise ValueError("need 0 < low < high")

    def sample(rng, size):
        return rng.uniform(low, high, size)

    sample.description = f"uniform({low},{high})"
    return sample


_UNIT = constant_weights(1.0)


@dataclass
class WeightedDigraph:
    """Directed weighted graph stored as parallel edge arrays."""

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (self.src.shape == self.dst.shape == self.weight.shape):
            raise ValueError("edge arrays must have equal length")
        if self.src.size:
            if self.src.min() < 0 or self.src.max() >= self.n \
                    or self.dst.min() < 0 or self.dst.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if (self.src == self.dst).any():
                raise ValueError("self-loops are not allowed")
            if (self.weight <= 0).any():
                raise ValueError("weights must be strictly positive")
            keys = self.src * self.n + self.dst
            if np.unique(keys).size != keys.size:
                raise ValueError("duplicate edges are not allowed")

    @property
    def edge_count(self) -> int:
        return int(self.src.size)

    @property
    def density(self) -> float:
        """Fraction of the n(n-1) ordered pairs that carry an edge."""
        possible = self.n * (self.n - 1)
        return self.edge_count / possible if possible else 0.0

    def edges(self):
        """Iterate (source, target, weight) tuples."""
        return zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist())

    def to_matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        m[self.src, self.dst] = self.weight
        return m

    @classmethod
    def from_matrix(cls, m, meta=None) -> "WeightedDigraph":
        m = np.asarray(m, dtype=np.float64)
        src, dst = np.nonzero(m)
        return cls(n=m.shape[0], src=src, dst=dst, weight=m[src, dst],
                   meta=dict(meta or {}))


def write_edge_list(g: WeightedDigraph, path, meta_path=None) -> None:
    """Edge-list CSV (source,target,weight) plus a JSON metadata sidecar."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "weight"])
        for s, d, w in g.edges():
            writer.writerow([s, d, repr(w)])
    if meta_path is not None:
        sidecar = {"n": g.n, "edge_count": g.edge_count, **g.meta}
        with open(meta_path, "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, default=str)
            fh.write("\n")


def read_edge_list(path, n: int | None = None) -> WeightedDigraph:
    src, dst, w = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            src.append(int(row["source"]))
            dst.append(int(row["target"]))
            w.append(float(row["weight"]))
    if n is None:
        n = max(max(src, default=-1), max(dst, default=-1)) + 1
    return WeightedDigraph(n=n, src=np.array(src, dtype=np.int64),
                           dst=np.array(dst, dtype=np.int64),
                           weight=np.array(w), meta={"source_file": str(path)})


def _from_mask(mask: np.ndarray, rng_weights, weight_sampler, meta) -> WeightedDigraph:
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    weights = (weight_sampler or _UNIT)(rng_weights, src.size)
    return WeightedDigraph(n=mask.shape[0], src=src, dst=dst, weight=weights,
                           meta=meta)


def gen_erdos_renyi(n: int, p: float, weight_sampler=None,
                    seed: int = 0) -> WeightedDigraph:
    """Each ordered pair (i != j) present independently with probability p."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng_s, rng_w = split_rngs(seed)
    mask = rng_s.random((n, n)) < p
    meta = {"ensemble": "erdos_renyi", "n": n, "p": p, "seed": seed,
            "weights": getattr(weight_sampler, "description", "unit")}
    return _from_mask(mask, rng_w, weight_sampler, meta)


def reciprocity(g: WeightedDigraph) -> float:
    """Fraction of directed edges whose reverse edge is also present."""
    if g.edge_count == 0:
        return 0.0
    present = set(zip(g.src.tolist(), g.dst.tolist()))
    rec = sum(1 for (s, d) in present if (d, s) in present)
    return rec / len(present)


def _steger_wormald_regular(n: int, k: int, rng) -> set[tuple[int, int]]:
    """Undirected k-regular graph via the pairing model with restarts."""
    while True:
        edges: set[tuple[int, int]] = set()
        stubs = np.repeat(np.arange(n), k)
        ok = True
        while stubs.size:
            rng.shuffle(stubs)
            leftover = []
            for a, b in zip(stubs[0::2], stubs[1::2]):
                a, b = int(a), int(b)
                if a > b:
                    a, b = b, a
                if a != b and (a, b) not in edges:
                    edges.add((a, b))
                else:
                    leftover.extend((a, b))
            if len(leftover) == stubs.size:
                # every remaining pairing is blocked: check if any completion
                # exists at all, otherwise restart from scratch
                nodes = sorted(set(leftover))
                if not any((u, v) not in edges
                           for i, u in enumerate(nodes) for v in nodes[i + 1:]):
                    ok = False
                    break
            stubs = np.array(leftover, dtype=np.int64)
        if ok:
            return edges


def gen_regular_random(n: int, k: int, reciprocity_threshold: float = 0.5,
                       weight_sampler=None, seed: int = 0,
                       max_swap_attempts: int | None = None) -> WeightedDigraph:
    """Directed graph with every in-degree and out-degree exactly k.

    An undirected k-regular pairing-model graph is read as fully
    reciprocated directed edges, then degree-preserving two-edge swaps run
    until the reciprocated fraction drops to the threshold.
    """
    if k >= n:
        raise ValueError("need k < n")
    if (n * k) % 2 != 0:
        raise ValueError("n*k must be even for the undirected stage")
    if not 0.0 <= reciprocity_threshold <= 1.0:
        raise ValueError("reciprocity threshold must lie in [0, 1]")
    rng_s, rng_w = split_rngs(seed)

    und = _steger_wormald_regular(n, k, rng_s)
    present = set()
    for a, b in und:
        present.add((a, b))
        present.add((b, a))

    if max_swap_attempts is None:
        max_swap_attempts = 100 * n * k
    edge_list = sorted(present)
    m = len(edge_list)
    rec_count = sum(1 for (s, d) in present if (d, s) in present)
    attempts = 0
    while rec_count / m > reciprocity_threshold and attempts < max_swap_attempts:
        attempts += 1
        i1, i2 = rng_s.integers(0, m, size=2)
        a, b = edge_list[i1]
        c, d = edge_list[i2]
        if len({a, b, c, d}) < 4:
            continue
        if (a, d) in present or (c, b) in present:
            continue
        for e in ((a, b), (c, d)):
            rec_count -= 2 if (e[1], e[0]) in present else 0
        present.discard((a, b))
        present.discard((c, d))
        present.add((a, d))
        present.add((c, b))
        for e in ((a, d), (c, b)):
            rec_count += 2 if (e[1], e[0]) in present else 0
        edge_list[i1] = (a, d)
        edge_list[i2] = (c, b)
    frac = rec_count / m
    if frac > reciprocity_threshold:
        raise GenerationError(
            f"reciprocity rewiring stalled at {frac:.3f} > "
            f"{reciprocity_threshold} after {attempts} attempts")

    edge_arr = np.array(sorted(present), dtype=np.int64)
    weights = (weight_sampler or _UNIT)(rng_w, edge_arr.shape[0])
    meta = {"ensemble": "regular_random", "n": n, "k": k,
            "reciprocity_threshold": reciprocity_threshold,
            "reciprocity": frac, "seed": seed,
            "weights": getattr(weight_sampler, "description", "unit")}
    return WeightedDigraph(n=n, src=edge_arr[:, 0], dst=edge_arr[:, 1],
                           weight=weights, meta=meta)


# ---------------------------------------------------------------------------
# directed scale-free growth (preferential attachment with three event types)

SCALE_FREE_DEFAULTS = {
    # alpha/beta/gamma event mix and attachment offsets tuned so the
    # asymptotic tail exponents are 2.15 (in) and 2.7 (out):
    #   X_in  = 1 + (1 + delta_in  * (alpha + gamma)) / (alpha + beta)
    #   X_out = 1 + (1 + delta_out * (alpha + gamma)) / (gamma + beta)
    "alpha": 0.41,
    "beta": 0.54,
    "gamma": 0.05,
    "delta_in": 0.2,
    "delta_out": 0.0,
}


def scale_free_exponents(alpha, beta, gamma, delta_in, delta_out):
    """Asymptotic in/out tail exponents of the growth process."""
    return (1.0 + (1.0 + delta_in * (alpha + gamma)) / (alpha + beta),
            1.0 + (1.0 + delta_out * (alpha + gamma)) / (gamma + beta))


class _ScaleFreeState:
    """Mutable growth state shared by the generator and the pathway driver."""

    def __init__(self, n: int, edges: set[tuple[int, int]],
                 alpha, beta, gamma, delta_in, delta_out):
        if abs(alpha + beta + gamma - 1.0) > 1e-12:
            raise ValueError("alpha + beta + gamma must equal 1")
        if min(alpha, beta, gamma) < 0 or delta_in < 0 or delta_out < 0:
            raise ValueError("negative growth parameter")
        if alpha + beta <= 0 or gamma + beta <= 0 or alpha + gamma <= 0:
            raise ValueError("degenerate growth parameters: no nodes or no "
                             "attachment mass")
        self.alpha, self.beta, self.gamma = alpha, beta, gamma
        self.delta_in, self.delta_out = delta_in, delta_out
        self.n = n
        self.edges = set(edges)
        self.k_in = np.zeros(n, dtype=np.int64)
        self.k_out = np.zeros(n, dtype=np.int64)
        for s, d in edges:
            self.k_out[s] += 1
            self.k_in[d] += 1

    def _grow_arrays(self):
        self.k_in = np.append(self.k_in, 0)
        self.k_out = np.append(self.k_out, 0)

    def _pick_in(self, rng) -> int:
        w = self.k_in + self.delta_in
        return int(rng.choice(self.n, p=w / w.sum()))

    def _pick_out(self, rng) -> int:
        w = self.k_out + self.delta_out
        return int(rng.choice(self.n, p=w / w.sum()))

    def advance(self, rng, max_tries: int = 64):
        """Run one process event.

        Returns ("node", new_node, new_edges) or ("edge", None, new_edges);
        new_edges may be empty when duplicate/self-loop resampling failed,
        in which case degrees are left untouched.
        """
        u = rng.random()
        if u < self.alpha:
            w = self._pick_in(rng)     # target chosen among existing nodes
            v = self.n
            self.n += 1
            self._grow_arrays()
            self._add(v, w)
            return "node", v, [(v, w)]
        if u < self.alpha + self.beta:
            for _ in range(max_tries):
                v = self._pick_out(rng)
                w = self._pick_in(rng)
                if v != w and (v, w) not in self.edges:
                    self._add(v, w)
                    return "edge", None, [(v, w)]
            return "edge", None, []
        v = self._pick_out(rng)
        w = self.n
        self.n += 1
        self._grow_arrays()
        self._add(v, w)
        return "node", w, [(v, w)]

    def _add(self, s, d):
        self.edges.add((s, d))
        self.k_out[s] += 1
        self.k_in[d] += 1


def _seed_cycle_edges(size: int = 3) -> set[tuple[int, int]]:
    return {(i, (i + 1) % size) for i in range(size)}


def scale_free_out_weight_mean(mean_leverage: float, k_out: int) -> float:
    """Mean of a node's outgoing-edge weight distribution.

    Inversely proportional to out-degree so per-bank leverages are
    homogeneous on average regardless of degree.
    """
    if k_out < 1:
        raise ValueError("k_out must be >= 1")
    return mean_leverage / k_out


def gen_scale_free(n_target: int, mean_leverage: float = 2.0, seed: int = 0,
                   alpha: float | None = None, beta: float | None = None,
                   gamma: float | None = None, delta_in: float | None = None,
                   delta_out: float | None = None,
                   max_events: int | None = None) -> WeightedDigraph:
    """Grow a directed scale-free graph to n_target nodes, then weight it.

    Outgoing-edge weights of a node with out-degree k are exponential with
    mean `mean_leverage / k`.  Growth parameters default to values whose
    asymptotic tail exponents are 2.15 (in-degree) and 2.7 (out-degree).
    """
    params = dict(SCALE_FREE_DEFAULTS)
    for name, val in (("alpha", alpha), ("beta", beta), ("gamma", gamma),
                      ("delta_in", delta_in), ("delta_out", delta_out)):
        if val is not None:
            params[name] = float(val)
    seed_size = 3
    if n_target < seed_size:
        raise ValueError(f"n_target must be at least the seed size {seed_size}")
    rng_s, rng_w = split_rngs(seed)
    state = _ScaleFreeState(seed_size, _seed_cycle_edges(seed_size), **params)
    if max_events is None:
        max_events = max(200 * (n_target - seed_size), 1000)
    events = 0
    while state.n < n_target:
        events += 1
        if events > max_events:
            raise GenerationError(
                f"scale-free growth stalled: {state.n} < {n_target} nodes "
                f"after {max_events} events")
        state.advance(rng_s)

    edge_arr = np.array(sorted(state.edges), dtype=np.int64)
    weights = np.empty(edge_arr.shape[0])
    for node in range(state.n):
        rows = np.flatnonzero(edge_arr[:, 0] == node)
        if rows.size:
            mean = scale_free_out_weight_mean(mean_leverage, rows.size)
            weights[rows] = rng_w.exponential(mean, rows.size)
    meta = {"ensemble": "scale_free", "n": state.n,
            "mean_leverage": mean_leverage, "seed": seed, **params,
            "exponents": scale_free_exponents(**params)}
    return WeightedDigraph(n=state.n, src=edge_arr[:, 0], dst=edge_arr[:, 1],
                           weight=weights, meta=meta)


@dataclass(frozen=True)
class CorePeripherySpec:
    """Block densities of a core-periphery topology."""

    n: int
    core_fraction: float
    rho_cc: float
    rho_cp: float
    rho_pc: float
    rho_pp: float

    def __post_init__(self):
        if not 0.0 < self.core_fraction < 1.0:
            raise ValueError("core_fraction must lie in (0, 1)")
        for name in ("rho_cc", "rho_cp", "rho_pc", "rho_pp"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n < 2:
            raise ValueError("need n >= 2")

    @property
    def n_core(self) -> int:
        return min(max(int(round(self.n * self.core_fraction)), 1), self.n - 1)


# Synthetic defaults for demos and tests.  These are this library's own
# choices, not estimates from any empirical interbank network.
SYNTHETIC_CP_DENSITIES = {"rho_cc": 0.7, "rho_cp": 0.2, "rho_pc": 0.2,
                          "rho_pp": 0.05}


def gen_core_periphery(cp: CorePeripherySpec, weight_sampler=None,
                       seed: int = 0) -> WeightedDigraph:
    """Block-random graph: two ER diagonal blocks, two bipartite ones.

    Nodes [0, n_core) form the core; the rest the periphery.
    """
    rng_s, rng_w = split_rngs(seed)
    n, nc = cp.n, cp.n_core
    mask = np.zeros((n, n), dtype=bool)
    u = rng_s.random((n, n))
    core = np.zeros(n, dtype=bool)
    core[:nc] = True
    mask[np.ix_(core, core)] = u[np.ix_(core, core)] < cp.rho_cc
    mask[np.ix_(core, ~core)] = u[np.ix_(core, ~core)] < cp.rho_cp
    mask[np.ix_(~core, core)] = u[np.ix_(~core, core)] < cp.rho_pc
    mask[np.ix_(~core, ~core)] = u[np.ix_(~core, ~core)] < cp.rho_pp
    meta = {"ensemble": "core_periphery", "n": n, "n_core": nc,
            "core_fraction": cp.core_fraction, "rho_cc": cp.rho_cc,
            "rho_cp": cp.rho_cp, "rho_pc": cp.rho_pc, "rho_pp": cp.rho_pp,
            "seed": seed,
            "weights": getattr(weight_sampler, "description", "unit")}
    return _from_mask(mask, rng_w, weight_sampler, meta)


def gen_random_dag(n: int, density: float, weight_sampler=None,
                   seed: int = 0) -> WeightedDigraph:
    """Acyclic by construction: edges only run forward along a uniformly
    random node permutation."""
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    rng_s, rng_w = split_rngs(seed)
    order = rng_s.permutation(n)
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    forward = rank[:, None] < rank[None, :]
    mask = forward & (rng_s.random((n, n)) < density)
    meta = {"ensemble": "random_dag", "n": n, "density": density, "seed": seed,
            "weights": getattr(weight_sampler, "description", "unit")}
    return _from_mask(mask, rng_w, weight_sampler, meta)
