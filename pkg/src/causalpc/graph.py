"""Predictive coding graph data model: vertices, edge functions, gains, state, energy.

A graph holds N vertices, each with a value node x_i of dimension d_i.  Every
directed edge (i, j) carries a function g_ij mapping the parent value to a
contribution to the child's prediction, gated by the gain entry a_ij:

    u_j = sum_i a_ij * g_ij(x_i)

Errors are e_j = x_j - u_j (or pinned to zero when the error is clamped), and
the energy is F = sum_j ||e_j||^2.  Root vertices predict 0, so their error
term acts as a mean-zero quadratic prior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .activations import get_activation

ROLES = ("endogenous", "exogenous", "input", "label")


class GraphError(ValueError):
    """Raised for structurally invalid graphs or mismatched shapes."""


@dataclass(frozen=True)
class VertexSpec:
    id: int
    dim: int = 1
    role: str = "endogenous"

    def __post_init__(self):
        if self.dim < 1:
            raise GraphError(f"vertex {self.id}: dim must be >= 1, got {self.dim}")
        if self.role not in ROLES:
            raise GraphError(f"vertex {self.id}: unknown role {self.role!r}")


# ---------------------------------------------------------------------------
# Edge functions
# ---------------------------------------------------------------------------

class ScalarLinear:
    """Elementwise edge: out = w * f(x).  Parent and child dims must match."""

    kind = "scalar_linear"

    def __init__(self, w: float = 1.0, activation: str = "identity", trainable: bool = True):
        self.w = np.array([float(w)])
        self.activation = activation
        self.act = get_activation(activation)
        self.trainable = trainable

    def check_dims(self, parent_dim, child_dim):
        if parent_dim != child_dim:
            raise GraphError(
                f"scalar edge needs equal endpoint dims, got {parent_dim} -> {child_dim}")

    def value(self, x):
        return self.w[0] * self.act.value(x)

    def vjp(self, x, e):
        return self.act.deriv(x) * (self.w[0] * e)

    def params(self):
        return [self.w]

    def param_grads(self, x, e, gain):
        # dF/dw = -2 * a * mean_b sum_d e * f(x)
        g = -2.0 * gain * np.mean(np.sum(e * self.act.value(x), axis=1))
        return [np.array([g])]

    def to_json(self):
        return {"kind": self.kind, "w": float(self.w[0]),
                "activation": self.activation, "trainable": self.trainable}

    @classmethod
    def from_json(cls, d):
        return cls(d["w"], d.get("activation", "identity"), d.get("trainable", True))


class DenseLinear:
    """Linear map after a nonlinearity: out = f(x) @ W.T with W of shape (d_child, d_parent)."""

    kind = "dense_linear"

    def __init__(self, W, activation: str = "identity", trainable: bool = True):
        self.W = np.asarray(W, dtype=float)
        if self.W.ndim != 2:
            raise GraphError(f"dense edge weight must be 2-d, got shape {self.W.shape}")
        self.activation = activation
        self.act = get_activation(activation)
        self.trainable = trainable

    def check_dims(self, parent_dim, child_dim):
        if self.W.shape != (child_dim, parent_dim):
            raise GraphError(
                f"dense edge weight shape {self.W.shape} does not match "
                f"{parent_dim} -> {child_dim}")

    def value(self, x):
        return self.act.value(x) @ self.W.T

    def vjp(self, x, e):
        return self.act.deriv(x) * (e @ self.W)

    def params(self):
        return [self.W]

    def param_grads(self, x, e, gain):
        fx = self.act.value(x)
        return [-2.0 * gain * (e.T @ fx) / x.shape[0]]

    def to_json(self):
        return {"kind": self.kind, "W": self.W.tolist(),
                "activation": self.activation, "trainable": self.trainable}

    @classmethod
    def from_json(cls, d):
        return cls(np.array(d["W"]), d.get("activation", "identity"), d.get("trainable", True))


class Mlp:
    """Small fully connected network edge; hidden layers share one activation,
    the output layer is linear."""

    kind = "mlp"

    def __init__(self, weights, biases, activation: str = "elu", trainable: bool = True):
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        if len(self.weights) != len(self.biases):
            raise GraphError("mlp edge needs one bias vector per weight matrix")
        self.activation = activation
        self.act = get_activation(activation)
        self.trainable = trainable

    @classmethod
    def init(cls, parent_dim, child_dim, hidden=(16, 16), activation="elu", rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        dims = [parent_dim, *hidden, child_dim]
        weights, biases = [], []
        for din, dout in zip(dims[:-1], dims[1:]):
            scale = np.sqrt(2.0 / (din + dout))
            weights.append(rng.normal(0.0, scale, size=(dout, din)))
            biases.append(np.zeros(dout))
        return cls(weights, biases, activation=activation)

    def check_dims(self, parent_dim, child_dim):
        if self.weights[0].shape[1] != parent_dim:
            raise GraphError(
                f"mlp edge input dim {self.weights[0].shape[1]} != parent dim {parent_dim}")
        if self.weights[-1].shape[0] != child_dim:
            raise GraphError(
                f"mlp edge output dim {self.weights[-1].shape[0]} != child dim {child_dim}")
        for l in range(len(self.weights) - 1):
            if self.weights[l + 1].shape[1] != self.weights[l].shape[0]:
                raise GraphError(f"mlp edge layer {l} -> {l + 1} shape mismatch")

    def _forward(self, x):
        # returns pre-activations z_l and layer inputs h_l (h_0 = x)
        hs, zs = [x], []
        h = x
        n_layers = len(self.weights)
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W.T + b
            zs.append(z)
            h = z if l == n_layers - 1 else self.act.value(z)
            hs.append(h)
        return hs, zs

    def value(self, x):
        return self._forward(x)[0][-1]

    def vjp(self, x, e):
        hs, zs = self._forward(x)
        delta = e
        for l in range(len(self.weights) - 1, -1, -1):
            if l != len(self.weights) - 1:
                delta = delta * self.act.deriv(zs[l])
            delta = delta @ self.weights[l]
        return delta

    def params(self):
        return [*self.weights, *self.biases]

    def param_grads(self, x, e, gain):
        hs, zs = self._forward(x)
        B = x.shape[0]
        n_layers = len(self.weights)
        w_grads = [None] * n_layers
        b_grads = [None] * n_layers
        delta = e
        for l in range(n_layers - 1, -1, -1):
            if l != n_layers - 1:
                delta = delta * self.act.deriv(zs[l])
            w_grads[l] = -2.0 * gain * (delta.T @ hs[l]) / B
            b_grads[l] = -2.0 * gain * np.mean(delta, axis=0)
            delta = delta @ self.weights[l]
        return [*w_grads, *b_grads]

    def to_json(self):
        return {"kind": self.kind,
                "weights": [W.tolist() for W in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "activation": self.activation, "trainable": self.trainable}

    @classmethod
    def from_json(cls, d):
        return cls([np.array(W) for W in d["weights"]],
                   [np.array(b) for b in d["biases"]],
                   d.get("activation", "elu"), d.get("trainable", True))


EDGE_KINDS = {c.kind: c for c in (ScalarLinear, DenseLinear, Mlp)}


def edge_from_json(d):
    try:
        cls = EDGE_KINDS[d["kind"]]
    except KeyError:
        raise GraphError(f"unknown edge kind {d.get('kind')!r}") from None
    return cls.from_json(d)


# ---------------------------------------------------------------------------
# Graph and per-sample state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyTarget:
    """Energy target for contrastive training: the label vertex's squared
    error is pushed toward k instead of 0, replacing that vertex's term by
    (||e||^2 - k)^2.  k may be a scalar or a per-row array."""

    label_vertex: int
    k: object = 0.0

    def k_rows(self, batch):
        k = np.asarray(self.k, dtype=float)
        if k.ndim == 0:
            k = np.full(batch, float(k))
        if np.any(k < 0):
            raise ValueError("energy target k must be >= 0")
        return k

    def label_energy(self, e):
        """Per-row energy contribution of the label vertex."""
        k = self.k_rows(e.shape[0])
        return (np.sum(e * e, axis=1) - k) ** 2

    def label_weights(self, e):
        """Per-row factor lambda such that dF/de_label = 2 * lambda * e."""
        k = self.k_rows(e.shape[0])
        return 2.0 * (np.sum(e * e, axis=1) - k)


class PCGraph:
    """Immutable-topology predictive coding graph.

    Vertices are indexed 0..N-1.  ``edges`` maps (parent, child) to an edge
    function; ``gains`` is the NxN gating matrix (entry [i, j] gates i -> j).
    Edge parameters and gains are the trainable state; the wiring never
    changes after construction.
    """

    def __init__(self, vertices, edges, gains=None, allow_self_edges=False):
        vertices = list(vertices)
        ids = [v.id for v in vertices]
        if ids != list(range(len(vertices))):
            raise GraphError(f"vertex ids must be contiguous 0..N-1, got {ids}")
        self.vertices = vertices
        self.n = len(vertices)
        self.dims = [v.dim for v in vertices]
        self.allow_self_edges = allow_self_edges

        self.edges = {}
        for (i, j), fn in edges.items() if isinstance(edges, dict) else edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i}, {j}) references an unknown vertex")
            if i == j and not allow_self_edges:
                raise GraphError(f"self-edge at vertex {i} not allowed")
            if (i, j) in self.edges:
                raise GraphError(f"duplicate edge ({i}, {j})")
            fn.check_dims(self.dims[i], self.dims[j])
            self.edges[(i, j)] = fn

        if gains is None:
            gains = np.zeros((self.n, self.n))
            for (i, j) in self.edges:
                gains[i, j] = 1.0
        gains = np.asarray(gains, dtype=float)
        if gains.shape != (self.n, self.n):
            raise GraphError(f"gains must be {self.n}x{self.n}, got {gains.shape}")
        self.gains = gains.copy()

        self.parents = [[] for _ in range(self.n)]
        self.children = [[] for _ in range(self.n)]
        for (i, j), fn in sorted(self.edges.items()):
            self.parents[j].append((i, fn))
            self.children[i].append((j, fn))

    def copy(self):
        return PCGraph(self.vertices, dict(self.edges), self.gains,
                       allow_self_edges=self.allow_self_edges)

    def trainable_edges(self):
        return [(key, fn) for key, fn in sorted(self.edges.items()) if fn.trainable]

    def topological_order(self):
        """Vertex order with parents first; raises GraphError on a cycle."""
        indeg = [0] * self.n
        for (_, j) in self.edges:
            indeg[j] += 1
        queue = [i for i in range(self.n) if indeg[i] == 0]
        order = []
        while queue:
            v = queue.pop(0)
            order.append(v)
            for (c, _) in self.children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if len(order) != self.n:
            raise GraphError("graph contains a directed cycle")
        return order

    def is_acyclic(self):
        try:
            self.topological_order()
            return True
        except GraphError:
            return False

    def to_json(self):
        return {
            "vertices": [{"id": v.id, "dim": v.dim, "role": v.role} for v in self.vertices],
            "edges": [{"parent": i, "child": j, **fn.to_json()}
                      for (i, j), fn in sorted(self.edges.items())],
            "gains": [float(g) for g in self.gains.ravel()],
            "allow_self_edges": self.allow_self_edges,
        }

    @classmethod
    def from_json(cls, d):
        vertices = [VertexSpec(v["id"], v["dim"], v.get("role", "endogenous"))
                    for v in d["vertices"]]
        edges = {(e["parent"], e["child"]): edge_from_json(e) for e in d["edges"]}
        n = len(vertices)
        gains = np.array(d["gains"], dtype=float).reshape(n, n)
        return cls(vertices, edges, gains, allow_self_edges=d.get("allow_self_edges", False))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def build_graph(vertices, edges, gains_init=None, allow_self_edges=False):
    """Validate and assemble a PCGraph.

    ``vertices`` may be VertexSpec objects or plain dims; ``edges`` maps
    (parent, child) pairs to edge functions.  Default gains are 1 on declared
    edges and 0 elsewhere.
    """
    vspecs = []
    for i, v in enumerate(vertices):
        if isinstance(v, VertexSpec):
            vspecs.append(v)
        else:
            vspecs.append(VertexSpec(i, int(v)))
    return PCGraph(vspecs, edges, gains_init, allow_self_edges=allow_self_edges)


@dataclass
class GraphState:
    """Per-sample (batched) value/prediction/error arrays plus clamp masks.

    Each values[i] has shape (B, d_i).  Clamp masks are per vertex:
    value-clamped vertices never move during inference; error-clamped
    vertices have their error pinned to the zero vector.
    """

    values: list
    predictions: list
    errors: list
    value_clamped: np.ndarray
    error_clamped: np.ndarray

    @property
    def batch(self):
        return self.values[0].shape[0]

    def copy(self):
        return GraphState([v.copy() for v in self.values],
                          [p.copy() for p in self.predictions],
                          [e.copy() for e in self.errors],
                          self.value_clamped.copy(), self.error_clamped.copy())


def init_state(graph, batch=1):
    values = [np.zeros((batch, d)) for d in graph.dims]
    preds = [np.zeros((batch, d)) for d in graph.dims]
    errs = [np.zeros((batch, d)) for d in graph.dims]
    return GraphState(values, preds, errs,
                      np.zeros(graph.n, dtype=bool), np.zeros(graph.n, dtype=bool))


def set_value(state, vertex, value, clamp=True):
    """Write a value into a vertex (broadcast a scalar/vector over the batch)."""
    arr = np.asarray(value, dtype=float)
    target = state.values[vertex]
    if arr.ndim <= 1:
        arr = np.broadcast_to(arr.reshape(1, -1) if arr.ndim == 1 else arr, target.shape)
    if arr.shape != target.shape:
        raise GraphError(
            f"value for vertex {vertex} has shape {arr.shape}, expected {target.shape}")
    state.values[vertex] = np.array(arr, dtype=float)
    if clamp:
        state.value_clamped[vertex] = True


def predict(graph, state):
    """Refresh all predictions and errors in place.

    u_j = sum over incoming edges of gain * edge(x_parent); roots get u = 0.
    Errors are x - u except where the error clamp pins them to zero.
    Idempotent for fixed values.
    """
    for j in range(graph.n):
        if state.values[j].shape[1] != graph.dims[j]:
            raise GraphError(f"state dim mismatch at vertex {j}")
        u = np.zeros_like(state.values[j])
        for (i, fn) in graph.parents[j]:
            a = graph.gains[i, j]
            if a != 0.0:
                u = u + a * fn.value(state.values[i])
        state.predictions[j] = u
        if state.error_clamped[j]:
            state.errors[j] = np.zeros_like(u)
        else:
            state.errors[j] = state.values[j] - u
    return state


def forward_sweep(graph, state):
    """Set every non-value-clamped vertex to its prediction, in topological
    order, then refresh.  Only valid for acyclic graphs."""
    for j in graph.topological_order():
        u = np.zeros_like(state.values[j])
        for (i, fn) in graph.parents[j]:
            a = graph.gains[i, j]
            if a != 0.0:
                u = u + a * fn.value(state.values[i])
        if not state.value_clamped[j]:
            state.values[j] = u
    return predict(graph, state)


def weighted_errors(graph, state, target=None):
    """Errors scaled so that dF/de_i = 2 * weighted_error_i.

    Without a target this is just the error list.  With an EnergyTarget the
    label vertex error picks up the factor 2*(||e||^2 - k) coming from the
    squared-deviation term of the contrastive energy.
    """
    if target is None:
        return state.errors
    out = list(state.errors)
    L = target.label_vertex
    e = state.errors[L]
    out[L] = target.label_weights(e)[:, None] * e
    return out


def energy(graph, state, target=None):
    """Batch-mean energy.

    Standard form: F = sum_i ||e_i||^2.  With a target, the label term is
    replaced by (||e_label||^2 - k)^2 so that negative samples are pushed
    toward energy k rather than 0.
    """
    per_row = np.zeros(state.batch)
    for i in range(graph.n):
        if target is not None and i == target.label_vertex:
            continue
        per_row += np.sum(state.errors[i] ** 2, axis=1)
    if target is not None:
        per_row += target.label_energy(state.errors[target.label_vertex])
    return float(np.mean(per_row))


def per_vertex_energy(graph, state):
    """Batch-mean squared error per vertex (no target variant)."""
    return np.array([float(np.mean(np.sum(state.errors[i] ** 2, axis=1)))
                     for i in range(graph.n)])
