"""Structural causal models: exact generative oracles and the PC-graph fit.

An ScmSpec is the ground truth: a binary DAG, one structural equation per
vertex (linear weights or a closed-form nonlinear expression), and Gaussian
noise parameters.  Oracles sample observational, interventional, and paired
counterfactual data exactly, in topological order.

A FittedScm is the model side: a PC graph with one exogenous root per
endogenous vertex, connected by a fixed unit edge so the exogenous value
node plays the role of the additive noise term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graph import (GraphError, PCGraph, ScalarLinear, Mlp, VertexSpec,
                    build_graph)
from .dynamics import TrainConfig, train
from .queries import CONVERGED, QueryConfig, conditional_query, interventional_query


# ---------------------------------------------------------------------------
# Structural equations
# ---------------------------------------------------------------------------

@dataclass
class LinearEq:
    """x_i = sum_j w_ji x_j + u_i."""

    weights: dict

    kind = "linear"

    @property
    def parents(self):
        return tuple(sorted(self.weights))

    def evaluate(self, X, u):
        out = np.array(u, dtype=float)
        for j, w in self.weights.items():
            out += w * X[:, j]
        return out

    def to_json(self):
        return {"kind": self.kind,
                "params": {"weights": {str(j): float(w) for j, w in self.weights.items()}}}


@dataclass
class ClosedFormEq:
    """x_i = expr(parents) + u_i, with expr drawn from the catalog below."""

    expr_id: str
    parent_ids: tuple

    kind = "closed_form"

    @property
    def parents(self):
        return tuple(sorted(self.parent_ids))

    def evaluate(self, X, u):
        return CLOSED_FORMS[self.expr_id](X) + u

    def to_json(self):
        return {"kind": self.kind,
                "params": {"id": self.expr_id, "parents": list(self.parent_ids)}}


def _sigmoid_bump(x):
    return -1.0 + 3.0 / (1.0 + np.exp(-2.0 * x))


#: nonlinear structural expressions for the common graphs, keyed "graph:vertex"
#: (vertex index is 0-based).  Each maps the sample matrix X to the noiseless
#: part of the target column.
CLOSED_FORMS = {
    "fork:1": lambda X: _sigmoid_bump(X[:, 0]),
    "fork:2": lambda X: 0.25 * X[:, 0] ** 2,
    "collider:2": lambda X: 0.05 * X[:, 0] + 0.25 * X[:, 1] ** 2,
    "confounder:1": lambda X: _sigmoid_bump(X[:, 0]),
    "confounder:2": lambda X: X[:, 0] + 0.25 * X[:, 1] ** 2,
    "chain:1": lambda X: _sigmoid_bump(X[:, 0]),
    "chain:2": lambda X: 0.25 * X[:, 1] ** 2,
    "mediator:1": lambda X: 1.0 - np.cosh(0.5 * X[:, 0]),
    "mediator:2": lambda X: X[:, 0] + 0.25 * X[:, 1] ** 2,
    "m_bias:2": lambda X: 0.5 * X[:, 0] ** 2 - X[:, 1],
    "m_bias:3": lambda X: X[:, 0] + 0.5 * X[:, 0] ** 2,
    "m_bias:4": lambda X: -1.5 * X[:, 1] ** 2,
    "butterfly:2": lambda X: 0.5 * X[:, 0] ** 2 - X[:, 1],
    "butterfly:3": lambda X: X[:, 0] + 0.5 * X[:, 0] ** 2 - 0.25 * X[:, 2] ** 2,
    "butterfly:4": lambda X: -1.5 * X[:, 1] ** 2 + 0.25 * X[:, 2] ** 2,
}


def equation_from_json(d):
    params = d["params"]
    if d["kind"] == "linear":
        return LinearEq({int(j): float(w) for j, w in params["weights"].items()})
    if d["kind"] == "closed_form":
        return ClosedFormEq(params["id"], tuple(params["parents"]))
    raise GraphError(f"unknown equation kind {d.get('kind')!r}")


# ---------------------------------------------------------------------------
# Spec + oracles
# ---------------------------------------------------------------------------

def _toposort(adjacency):
    n = adjacency.shape[0]
    indeg = adjacency.sum(axis=0).astype(int)
    queue = [i for i in range(n) if indeg[i] == 0]
    order = []
    while queue:
        v = queue.pop(0)
        order.append(v)
        for c in np.flatnonzero(adjacency[v]):
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(int(c))
    if len(order) != n:
        raise GraphError("adjacency matrix contains a directed cycle")
    return order


@dataclass
class ScmSpec:
    adjacency: np.ndarray
    equations: list
    noise: list  # (mu, sigma) per vertex

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency, dtype=float)
        n = self.adjacency.shape[0]
        if self.adjacency.shape != (n, n):
            raise GraphError("adjacency must be square")
        _toposort(self.adjacency)
        if len(self.equations) != n or len(self.noise) != n:
            raise GraphError("need one equation and one noise pair per vertex")
        for i, eq in enumerate(self.equations):
            declared = tuple(sorted(int(j) for j in np.flatnonzero(self.adjacency[:, i])))
            if tuple(eq.parents) != declared:
                raise GraphError(
                    f"equation {i} parents {eq.parents} != adjacency parents {declared}")

    @property
    def n(self):
        return self.adjacency.shape[0]

    def topological_order(self):
        return _toposort(self.adjacency)

    def to_json(self):
        return {
            "adjacency": [[int(v) for v in row] for row in (self.adjacency != 0).astype(int)],
            "equations": [eq.to_json() for eq in self.equations],
            "noise": [{"mu": float(m), "sigma": float(s)} for (m, s) in self.noise],
        }

    @classmethod
    def from_json(cls, d):
        return cls(np.array(d["adjacency"], dtype=float),
                   [equation_from_json(e) for e in d["equations"]],
                   [(n["mu"], n["sigma"]) for n in d["noise"]])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def descendants(self, j):
        """Strict descendants of vertex j under the adjacency."""
        reach = np.zeros(self.n, dtype=bool)
        frontier = [j]
        while frontier:
            v = frontier.pop()
            for c in np.flatnonzero(self.adjacency[v]):
                if not reach[c]:
                    reach[c] = True
                    frontier.append(int(c))
        return [int(i) for i in np.flatnonzero(reach)]


def _draw_noise(spec, n, seed):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, spec.n))
    mu = np.array([m for (m, _) in spec.noise])
    sigma = np.array([s for (_, s) in spec.noise])
    return mu + sigma * Z


def _evaluate(spec, U, intervention=None):
    n = U.shape[0]
    X = np.zeros_like(U)
    do_vertex = do_values = None
    if intervention is not None:
        do_vertex, do_values = intervention
        do_values = np.broadcast_to(np.asarray(do_values, dtype=float), (n,))
    for i in spec.topological_order():
        if do_vertex is not None and i == do_vertex:
            X[:, i] = do_values
        else:
            X[:, i] = spec.equations[i].evaluate(X, U[:, i])
    return X


def oracle_sample(spec, n, intervention=None, seed=0):
    """Exact samples from the SCM; intervention (j, s) overrides x_j before
    descendants are evaluated.  Deterministic per seed."""
    U = _draw_noise(spec, n, seed)
    return _evaluate(spec, U, intervention)


def oracle_sample_with_noise(spec, n, seed=0):
    """Like oracle_sample but also returns the exogenous draws (for
    association-level evaluation of abducted noise)."""
    U = _draw_noise(spec, n, seed)
    return _evaluate(spec, U), U


@dataclass(frozen=True)
class CfPair:
    factual: np.ndarray
    counterfactual: np.ndarray
    do_vertex: int
    do_value: float


@dataclass
class CfDataset:
    """Paired factual/counterfactual rows sharing the same exogenous draw."""

    factual: np.ndarray
    counterfactual: np.ndarray
    do_vertex: int
    do_values: np.ndarray

    def __len__(self):
        return self.factual.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield CfPair(self.factual[i], self.counterfactual[i],
                         self.do_vertex, float(self.do_values[i]))


def oracle_counterfactual(spec, n, do_vertex, do_values, seed=0):
    """Draw the noise once, evaluate the factual rows, then re-evaluate with
    x_do overridden; non-descendants are identical by construction."""
    U = _draw_noise(spec, n, seed)
    factual = _evaluate(spec, U)
    counterfactual = _evaluate(spec, U, (do_vertex, do_values))
    dv = np.broadcast_to(np.asarray(do_values, dtype=float), (n,)).copy()
    return CfDataset(factual, counterfactual, do_vertex, dv)


# ---------------------------------------------------------------------------
# PC-graph side: augmentation, fitting, abduction
# ---------------------------------------------------------------------------

def augment_with_exogenous(adjacency, edge_kind="scalar_linear", seed=0,
                           hidden=(16, 16), activation="elu", init_scale=0.1):
    """Build a 2N-vertex PC graph: endogenous wiring per the adjacency plus a
    fixed unit edge from exogenous root N+i to endogenous vertex i."""
    adjacency = np.asarray(adjacency, dtype=float)
    n = adjacency.shape[0]
    _toposort(adjacency)
    rng = np.random.default_rng(seed)
    vertices = [VertexSpec(i, 1, "endogenous") for i in range(n)]
    vertices += [VertexSpec(n + i, 1, "exogenous") for i in range(n)]
    edges = {}
    for j in range(n):
        for i in np.flatnonzero(adjacency[:, j]):
            if edge_kind == "scalar_linear":
                w0 = rng.uniform(-init_scale, init_scale)
                edges[(int(i), j)] = ScalarLinear(w0, activation="identity")
            elif edge_kind == "mlp":
                edges[(int(i), j)] = Mlp.init(1, 1, hidden=hidden,
                                              activation=activation, rng=rng)
            else:
                raise GraphError(f"unknown edge kind {edge_kind!r}")
    for i in range(n):
        edges[(n + i, i)] = ScalarLinear(1.0, activation="identity", trainable=False)
    return build_graph(vertices, edges)


@dataclass
class FittedScm:
    """PC graph with exogenous roots plus the estimated noise distribution."""

    graph: PCGraph
    noise_estimates: list = field(default_factory=list)  # (mean, std) per endogenous

    def __post_init__(self):
        exo = self.exogenous_ids
        for v in exo:
            if self.graph.parents[v]:
                raise GraphError(f"exogenous vertex {v} must be a root")

    @property
    def n(self):
        return sum(1 for v in self.graph.vertices if v.role != "exogenous")

    @property
    def endogenous_ids(self):
        return [v.id for v in self.graph.vertices if v.role != "exogenous"]

    @property
    def exogenous_ids(self):
        return [v.id for v in self.graph.vertices if v.role == "exogenous"]

    def exo_of(self, i):
        return self.n + i

    def to_json(self):
        return {"graph": self.graph.to_json(),
                "noise_estimates": [{"mean": float(m), "std": float(s)}
                                    for (m, s) in self.noise_estimates]}

    @classmethod
    def from_json(cls, d):
        return cls(PCGraph.from_json(d["graph"]),
                   [(e["mean"], e["std"]) for e in d["noise_estimates"]])

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def abduct(fitted, rows, config=None):
    """Infer exogenous values for full endogenous rows (B, N); returns a
    (B, N) array whose column i is the abducted noise of endogenous vertex i.

    The endogenous values are clamped and the exogenous errors are pinned to
    zero, so each exogenous root relaxes to the full residual of its child.
    """
    config = config or CONVERGED
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    n = fitted.n
    if rows.shape[1] != n:
        raise GraphError(f"expected {n} endogenous columns, got {rows.shape[1]}")
    evidence = {i: rows[:, [i]] for i in fitted.endogenous_ids}
    from .queries import abduct_noise
    exo_values = abduct_noise(fitted, evidence, config)
    return np.hstack([exo_values[fitted.exo_of(i)] for i in range(n)])


def fit_scm(graph, data, config=None, abduction_config=None, epoch_callback=None):
    """Appendix-style fitting loop: clamp endogenous vertices to the data,
    infer exogenous values by relaxation, and update the edge weights at the
    inferred state.  After training, a converged abduction pass over the
    training set yields the empirical mean/std of each exogenous variable.

    Returns (FittedScm, TrainResult).
    """
    config = config or TrainConfig()
    data = np.asarray(data, dtype=float)
    fitted = FittedScm(graph, [])
    n = fitted.n
    if data.shape[1] != n:
        raise GraphError(f"data has {data.shape[1]} columns, graph expects {n}")
    clamp_spec = {i: i for i in range(n)}
    result = train(graph, data, clamp_spec, config,
                   error_clamp=fitted.exogenous_ids,
                   epoch_callback=epoch_callback)
    noise = abduct(fitted, data, abduction_config)
    fitted.noise_estimates = [(float(np.mean(noise[:, i])), float(np.std(noise[:, i])))
                              for i in range(n)]
    return fitted, result


def sample_fitted(fitted, n, intervention=None, seed=0, config=None):
    """Generate endogenous samples from the fitted model: draw exogenous
    values from the estimated noise distributions, clamp them, and relax the
    endogenous vertices (with the intervention's value+error clamp applied
    when given).  Returns an (n, N) matrix of endogenous columns."""
    config = config or CONVERGED
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, fitted.n))
    evidence = {}
    for i in range(fitted.n):
        mean, std = fitted.noise_estimates[i]
        evidence[fitted.exo_of(i)] = (mean + std * Z[:, i]).reshape(-1, 1)
    if intervention is None:
        res = conditional_query(fitted.graph, evidence, config)
    else:
        j, s = intervention
        do = {j: np.broadcast_to(np.asarray(s, dtype=float), (n,)).reshape(-1, 1)}
        res = interventional_query(fitted.graph, do, evidence, config)
    return np.hstack([res.values[i] for i in fitted.endogenous_ids])


def counterfactual_estimate(fitted, factual_rows, do_vertex, do_values,
                            config=None, abduction_config=None):
    """Model's counterfactual rows for a batch of factual rows under
    do(x_j = s); returns an (n, N) endogenous matrix."""
    from .queries import counterfactual_query
    factual_rows = np.atleast_2d(np.asarray(factual_rows, dtype=float))
    B = factual_rows.shape[0]
    evidence = {i: factual_rows[:, [i]] for i in fitted.endogenous_ids}
    do = {do_vertex: np.broadcast_to(np.asarray(do_values, dtype=float), (B,)).reshape(-1, 1)}
    res = counterfactual_query(fitted, evidence, do, config, abduction_config)
    return np.hstack([res.values[i] for i in fitted.endogenous_ids])
