"""Synthetic structure and dataset generators.

Covers the common 3- and 5-vertex graphs (linear and nonlinear catalogs),
Erdos-Renyi and scale-free random DAGs with signed uniform weights, and the
bundled train/test benchmark used to evaluate fitted models.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import GraphError
from .scm import (ClosedFormEq, LinearEq, ScmSpec, oracle_counterfactual,
                  oracle_sample, oracle_sample_with_noise)

COMMON_GRAPHS = ("chain", "collider", "confounder", "fork", "mediator",
                 "m_bias", "butterfly")

#: wiring of the common structures, 0-indexed (parent, child)
COMMON_WIRING = {
    "chain": [(0, 1), (1, 2)],
    "collider": [(0, 2), (1, 2)],
    "confounder": [(0, 1), (0, 2), (1, 2)],
    "fork": [(0, 1), (0, 2)],
    "mediator": [(0, 1), (1, 2), (0, 2)],
    "m_bias": [(0, 2), (1, 2), (0, 3), (1, 4)],
    "butterfly": [(0, 2), (1, 2), (0, 3), (2, 3), (1, 4), (2, 4)],
}

#: vertices with a catalog closed form in the nonlinear regime; roots are pure noise
_NONLINEAR_IDS = {
    "chain": {1: "chain:1", 2: "chain:2"},
    "collider": {2: "collider:2"},
    "confounder": {1: "confounder:1", 2: "confounder:2"},
    "fork": {1: "fork:1", 2: "fork:2"},
    "mediator": {1: "mediator:1", 2: "mediator:2"},
    "m_bias": {2: "m_bias:2", 3: "m_bias:3", 4: "m_bias:4"},
    "butterfly": {2: "butterfly:2", 3: "butterfly:3", 4: "butterfly:4"},
}


@dataclass
class RandomGraphConfig:
    kind: str = "ER"          # "ER" or "SF"
    n_nodes: int = 10
    edges_per_node: int = 1   # ER1/ER2 <-> 1/2, SF2/SF4 <-> 2/4
    weight_range: tuple = (0.5, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("ER", "SF"):
            raise ValueError(f"unknown random graph kind {self.kind!r}")
        if self.n_nodes < 2:
            raise ValueError("need at least 2 nodes")
        if self.edges_per_node < 1:
            raise ValueError("need at least 1 expected edge per node")


def gen_random_dag(config):
    """Binary DAG adjacency.

    ER: undirected Erdos-Renyi with edge probability 2k/(N-1) (expected kN
    edges), oriented along a uniformly random vertex ordering.  SF:
    preferential attachment starting from a complete graph on the first k
    vertices, each newcomer attaching to k existing vertices, edges oriented
    from later-attached to earlier.
    """
    rng = np.random.default_rng(config.seed)
    n, k = config.n_nodes, config.edges_per_node
    A = np.zeros((n, n))
    if config.kind == "ER":
        p = min(1.0, 2.0 * k / (n - 1))
        order = rng.permutation(n)
        rank = np.empty(n, dtype=int)
        rank[order] = np.arange(n)
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < p:
                    if rank[i] < rank[j]:
                        A[i, j] = 1.0
                    else:
                        A[j, i] = 1.0
    else:
        m = min(k, n - 1)
        degree = np.zeros(n)
        for i in range(m):
            for j in range(i + 1, m):
                A[j, i] = 1.0      # complete seed graph, later -> earlier
                degree[i] += 1
                degree[j] += 1
        for v in range(m, n):
            existing = np.arange(v)
            weights = degree[:v] + 1.0   # +1 keeps isolated seeds reachable
            targets = rng.choice(existing, size=min(m, v), replace=False,
                                 p=weights / weights.sum())
            for t in targets:
                A[v, t] = 1.0
                degree[v] += 1
                degree[t] += 1
    return A


def assign_weights(A, weight_range=(0.5, 2.0), seed=0):
    """Replace unit entries by signed uniform weights; zeros stay zero."""
    rng = np.random.default_rng(seed)
    A = np.asarray(A, dtype=float)
    W = np.zeros_like(A)
    idx = np.argwhere(A != 0)
    for (i, j) in idx:
        w = rng.uniform(*weight_range)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        W[i, j] = sign * w
    return W


def wiring_to_adjacency(edges, n):
    A = np.zeros((n, n))
    for (i, j) in edges:
        A[i, j] = 1.0
    return A


def linear_spec_from_weights(W, noise=None):
    """ScmSpec with x_i = sum_j W[j, i] x_j + u_i."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    noise = noise or [(0.0, 1.0)] * n
    equations = []
    for i in range(n):
        parents = np.flatnonzero(W[:, i])
        equations.append(LinearEq({int(j): float(W[j, i]) for j in parents}))
    return ScmSpec((W != 0).astype(float), equations, list(noise))


def common_graph(name, regime="linear", seed=0, weight_range=(0.5, 2.0), noise=None):
    """ScmSpec for one of the common structures.

    Linear regime draws signed uniform weights per seed; the nonlinear regime
    uses the fixed closed-form catalog.  Noise defaults to N(0, 1) per vertex.
    """
    if name not in COMMON_WIRING:
        raise GraphError(f"unknown common graph {name!r}; known: {sorted(COMMON_WIRING)}")
    edges = COMMON_WIRING[name]
    n = 5 if name in ("m_bias", "butterfly") else 3
    A = wiring_to_adjacency(edges, n)
    noise = noise or [(0.0, 1.0)] * n
    if regime == "linear":
        W = assign_weights(A, weight_range, seed)
        return linear_spec_from_weights(W, noise)
    if regime == "nonlinear":
        ids = _NONLINEAR_IDS[name]
        equations = []
        for i in range(n):
            parents = tuple(int(j) for j in np.flatnonzero(A[:, i]))
            if parents:
                equations.append(ClosedFormEq(ids[i], parents))
            else:
                equations.append(LinearEq({}))
        return ScmSpec(A, equations, list(noise))
    raise GraphError(f"unknown regime {regime!r}")


def intervention_grid(train_data, vertex,
                      factors=(-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0)):
    """Realistic intervention values: empirical mean plus empirical std times
    each factor, computed from the training data for the given column."""
    col = train_data[:, vertex]
    return np.mean(col) + np.std(col) * np.asarray(factors)


@dataclass
class Benchmark:
    spec: ScmSpec
    train: np.ndarray
    test_obs: np.ndarray
    test_obs_noise: np.ndarray   # exogenous draws behind test_obs
    test_do: dict        # {vertex: {value: (n_test, N) samples}}
    test_cf: dict        # {vertex: {value: CfDataset}}

    @property
    def intervention_vertices(self):
        return sorted(self.test_do)


def make_benchmark(spec, n_train=3000, n_test=1000, seed=0,
                   factors=(-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0)):
    """Observational train/test splits plus interventional and counterfactual
    test sets over every non-leaf vertex, one intervention at a time."""
    train = oracle_sample(spec, n_train, seed=seed) if n_train else np.zeros((0, spec.n))
    if n_test:
        test_obs, test_noise = oracle_sample_with_noise(spec, n_test, seed=seed + 1)
    else:
        test_obs = np.zeros((0, spec.n))
        test_noise = np.zeros((0, spec.n))
    test_do, test_cf = {}, {}
    if n_test:
        non_leaf = [j for j in range(spec.n) if spec.descendants(j)]
        base = train if n_train else test_obs
        for rank, j in enumerate(non_leaf):
            grid = intervention_grid(base, j, factors)
            test_do[j] = {}
            test_cf[j] = {}
            for gi, s in enumerate(grid):
                s = float(s)
                do_seed = seed + 1000 + 131 * rank + gi
                test_do[j][s] = oracle_sample(spec, n_test, intervention=(j, s),
                                              seed=do_seed)
                test_cf[j][s] = oracle_counterfactual(spec, n_test, j, s,
                                                      seed=do_seed + 500_000)
    return Benchmark(spec, train, test_obs, test_noise, test_do, test_cf)
