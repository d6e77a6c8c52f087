"""Inference and learning dynamics for predictive coding graphs.

Inference relaxes unclamped value nodes by gradient descent on the energy;
learning updates edge parameters and gains once per batch ("standard" mode)
or at every inference step ("ipc").  All gradient functions return exact
gradients of the batch-mean energy, so they can be checked directly against
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import (ScalarLinear, energy, forward_sweep, init_state, predict,
                    weighted_errors, GraphError)


@dataclass
class TrainConfig:
    """Hyperparameters for inference and learning.

    gamma is the value-node step size, alpha the edge-parameter learning
    rate, beta the gain learning rate.  mode selects when parameters are
    updated: once per batch at t = T ("standard") or at every inference step
    ("ipc", which coincides with standard when T = 1).
    """

    T: int = 8
    gamma: float = 3e-3
    alpha: float = 8e-3
    beta: float = 5e-3
    weight_decay: float = 1e-4
    epochs: int = 100
    batch_size: int = 128
    mode: str = "standard"
    optimizer_weights: str = "adamw"
    optimizer_gains: str = "adamw"
    gain_weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if min(self.gamma, self.alpha, self.beta) <= 0:
            raise ValueError("learning rates must be > 0")
        if self.mode not in ("standard", "ipc"):
            raise ValueError(f"unknown mode {self.mode!r}")


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

class SGD:
    def __init__(self, params, lr):
        self.params = list(params)
        self.lr = lr

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        for p, g in zip(self.params, grads):
            if p.shape != np.shape(g):
                raise ValueError(f"gradient shape {np.shape(g)} != param shape {p.shape}")
            p -= self.lr * g


class AdamW:
    """Adam with decoupled weight decay; (beta1, beta2, eps) = (0.9, 0.999, 1e-8)."""

    def __init__(self, params, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]

    def step(self, grads):
        if len(grads) != len(self.params):
            raise ValueError("gradient list does not match parameter list")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(self.params, grads)):
            g = np.asarray(g, dtype=float)
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} != param shape {p.shape}")
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay:
                p -= self.lr * self.weight_decay * p


def make_optimizer(kind, params, lr, weight_decay=0.0):
    if kind == "sgd":
        return SGD(params, lr)
    if kind == "adamw":
        return AdamW(params, lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer {kind!r}")


# ---------------------------------------------------------------------------
# Gradients and inference
# ---------------------------------------------------------------------------

def _value_direction(graph, state, target=None):
    """Per-sample descent direction for each vertex: -e_j plus the error
    backflow from children.  Equals -dF_row/dx_j / 2."""
    werr = weighted_errors(graph, state, target)
    dirs = []
    for j in range(graph.n):
        d = -werr[j].copy()
        x_j = state.values[j]
        for (c, fn) in graph.children[j]:
            a = graph.gains[j, c]
            if a != 0.0:
                d += a * fn.vjp(x_j, werr[c])
        dirs.append(d)
    return dirs


def value_grads(graph, state, target=None):
    """Exact per-sample gradient of the (per-row) energy w.r.t. each value
    node: shape (B, d_j) per vertex.  Clamps do not zero these; callers mask."""
    return [-2.0 * d for d in _value_direction(graph, state, target)]


def value_step(graph, state, gamma, target=None):
    """One simultaneous relaxation step on all unclamped value nodes, then a
    prediction/error refresh.  x_j += gamma * (-e_j + backflow)."""
    dirs = _value_direction(graph, state, target)
    for j in range(graph.n):
        if not state.value_clamped[j]:
            state.values[j] = state.values[j] + gamma * dirs[j]
    return predict(graph, state)


def run_inference(graph, state, config, target=None, early_stop_tol=None):
    """Run T relaxation steps; returns (state, energy trace of length T).

    If every vertex is value-clamped the state cannot move, so the loop is
    skipped and the trace is constant.  early_stop_tol stops once the energy
    decrease per step falls below the tolerance (off by default).
    """
    predict(graph, state)
    if bool(np.all(state.value_clamped)):
        f = energy(graph, state, target)
        return state, [f] * config.T
    trace = []
    prev = energy(graph, state, target)
    for _ in range(config.T):
        value_step(graph, state, config.gamma, target)
        f = energy(graph, state, target)
        trace.append(f)
        if early_stop_tol is not None and abs(prev - f) < early_stop_tol:
            break
        prev = f
    return state, trace


def weight_grads(graph, state, target=None):
    """Exact gradient of the batch-mean energy w.r.t. every trainable edge's
    parameters; dict keyed by (parent, child)."""
    werr = weighted_errors(graph, state, target)
    grads = {}
    for (i, j), fn in graph.trainable_edges():
        grads[(i, j)] = fn.param_grads(state.values[i], werr[j], graph.gains[i, j])
    return grads


def gain_grads(graph, state, target=None):
    """Exact gradient of the batch-mean energy w.r.t. the gain matrix (data
    term only; structure priors are added by the caller)."""
    werr = weighted_errors(graph, state, target)
    G = np.zeros_like(graph.gains)
    for (i, j), fn in sorted(graph.edges.items()):
        out = fn.value(state.values[i])
        G[i, j] = -2.0 * float(np.mean(np.sum(werr[j] * out, axis=1)))
    return G


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class NegativeSampling:
    """Contrastive relabeling: with probability p_ns a row's label value is
    replaced by one drawn from the empirical label pool and trained against
    target energy k; other rows use the plain energy."""

    p_ns: float
    k: float
    label_vertex: int

    def __post_init__(self):
        if not 0.0 <= self.p_ns <= 1.0:
            raise ValueError("p_ns must lie in [0, 1]")
        if self.k <= 0.0:
            raise ValueError("negative-sample target k must be > 0")


@dataclass
class TrainResult:
    graph: object
    trace: list = field(default_factory=list)

    def trace_column(self, key):
        return np.array([row[key] for row in self.trace])


def _clamp_columns(state, data_batch, clamp_spec):
    for vertex, cols in clamp_spec.items():
        cols_list = [cols] if np.isscalar(cols) else list(cols)
        block = data_batch[:, cols_list]
        state.values[vertex] = np.array(block, dtype=float)
        state.value_clamped[vertex] = True


def init_free_values(graph, state):
    """Zero free values, then one forward sweep when the graph is acyclic so
    downstream predictions start consistent."""
    for j in range(graph.n):
        if not state.value_clamped[j]:
            state.values[j] = np.zeros_like(state.values[j])
    if graph.is_acyclic():
        forward_sweep(graph, state)
    else:
        predict(graph, state)
    return state


def _uniform_scalar_clamped(graph, clamp_spec, config, error_clamp):
    """True when training reduces to least squares on the gain matrix: every
    vertex is scalar and clamped, and every edge is a fixed unit identity, so
    inference is a no-op and all updates are dense matrix operations."""
    if config.mode != "standard" or error_clamp:
        return False
    if set(clamp_spec) != set(range(graph.n)):
        return False
    if any(d != 1 for d in graph.dims):
        return False
    if len(graph.edges) != graph.n * (graph.n - 1) + (graph.n if graph.allow_self_edges else 0):
        return False
    for fn in graph.edges.values():
        if not (isinstance(fn, ScalarLinear) and fn.w[0] == 1.0
                and fn.activation == "identity" and not fn.trainable):
            return False
    return True


def train(graph, data, clamp_spec, config, error_clamp=(), negatives=None,
          gain_prior=None, train_gains=False, epoch_callback=None):
    """Fit edge parameters (and optionally gains) to a dataset.

    Per batch: clamp observed columns, initialize free values, run T
    inference steps, then apply one parameter update (standard) or one per
    step (ipc).  Gradients are averaged over the batch.

    clamp_spec maps vertex id -> column index (or list of columns for
    multi-dimensional vertices).  error_clamp lists vertices whose errors are
    pinned to zero throughout (used for exogenous roots during abduction).
    gain_prior, if given, is called as gain_prior(gains, epoch) ->
    (value_dict, grad_matrix) and its gradient is added to the gain update.
    Returns a TrainResult whose trace has one row per epoch.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise GraphError("training data must be a 2-d array")
    for vertex, cols in clamp_spec.items():
        width = 1 if np.isscalar(cols) else len(cols)
        if width != graph.dims[vertex]:
            raise GraphError(
                f"clamp spec gives {width} columns to vertex {vertex} "
                f"of dim {graph.dims[vertex]}")

    rng = np.random.default_rng(config.seed)
    n = data.shape[0]
    batch_size = config.batch_size or n

    if train_gains and _uniform_scalar_clamped(graph, clamp_spec, config, error_clamp):
        return _train_dense_scalar(graph, data, clamp_spec, config, negatives,
                                   gain_prior, epoch_callback, rng)

    edge_items = graph.trainable_edges()
    params = [p for _, fn in edge_items for p in fn.params()]
    opt_w = make_optimizer(config.optimizer_weights, params, config.alpha,
                           config.weight_decay) if params else None
    opt_g = make_optimizer(config.optimizer_gains, [graph.gains], config.beta,
                           config.gain_weight_decay) if train_gains else None

    label_pool = None
    if negatives is not None:
        cols = clamp_spec[negatives.label_vertex]
        cols_list = [cols] if np.isscalar(cols) else list(cols)
        label_pool = data[:, cols_list]

    def apply_updates(state, target, epoch):
        if opt_w is not None:
            wg = weight_grads(graph, state, target)
            flat = [g for key, _ in edge_items for g in wg[key]]
            opt_w.step(flat)
        if opt_g is not None:
            G = gain_grads(graph, state, target)
            if not graph.allow_self_edges:
                np.fill_diagonal(G, 0.0)
            if gain_prior is not None:
                _, prior_grad = gain_prior(graph.gains, epoch)
                G = G + prior_grad
            opt_g.step([G])
            if not graph.allow_self_edges:
                np.fill_diagonal(graph.gains, 0.0)

    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_energy = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            batch = data[rows]
            state = init_state(graph, batch.shape[0])
            _clamp_columns(state, batch, clamp_spec)
            for v in error_clamp:
                state.error_clamped[v] = True

            target = None
            if negatives is not None:
                neg_mask = rng.random(batch.shape[0]) < negatives.p_ns
                if np.any(neg_mask):
                    resampled = label_pool[rng.integers(0, n, size=int(neg_mask.sum()))]
                    lv = negatives.label_vertex
                    vals = state.values[lv].copy()
                    vals[neg_mask] = resampled
                    state.values[lv] = vals
                # relabeled rows train against target energy k; the rest keep
                # the plain quadratic term
                target = _MixedTarget(negatives.label_vertex, negatives.k, neg_mask)

            init_free_values(graph, state)
            if config.mode == "ipc":
                for _ in range(config.T):
                    value_step(graph, state, config.gamma, target)
                    apply_updates(state, target, epoch)
            else:
                state, _ = run_inference(graph, state, config, target)
                apply_updates(state, target, epoch)
            epoch_energy += energy(graph, state, target)
            n_batches += 1

        row = {"epoch": epoch, "energy": epoch_energy / max(n_batches, 1)}
        if gain_prior is not None:
            values, _ = gain_prior(graph.gains, epoch)
            row.update(values)
        if epoch_callback is not None:
            extra = epoch_callback(epoch, graph)
            if extra:
                row.update(extra)
        trace.append(row)
    return TrainResult(graph=graph, trace=trace)


def _train_dense_scalar(graph, data, clamp_spec, config, negatives,
                        gain_prior, epoch_callback, rng):
    """Vectorized route through the same updates as the generic loop for the
    fully clamped scalar regime: predictions are X @ A, the gain gradient is
    -2/B X^T E (with the contrastive per-row weighting applied to the label
    column), and the rng is consumed in the same order as the generic path."""
    n = data.shape[0]
    batch_size = config.batch_size or n
    colmap = np.array([clamp_spec[v] for v in range(graph.n)], dtype=int)
    X_all = data[:, colmap]
    opt_g = make_optimizer(config.optimizer_gains, [graph.gains], config.beta,
                           config.gain_weight_decay)
    lv = negatives.label_vertex if negatives is not None else None
    label_pool = X_all[:, lv] if negatives is not None else None

    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_energy = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            X = X_all[rows].copy()
            B = X.shape[0]
            neg_mask = None
            if negatives is not None:
                neg_mask = rng.random(B) < negatives.p_ns
                if np.any(neg_mask):
                    X[neg_mask, lv] = label_pool[rng.integers(0, n, size=int(neg_mask.sum()))]
            A = graph.gains
            E = X - X @ A
            per_row = np.sum(E * E, axis=1)
            lam = None
            if neg_mask is not None:
                sq = E[:, lv] ** 2
                per_row = per_row - sq + np.where(neg_mask, (sq - negatives.k) ** 2, sq)
                lam = np.where(neg_mask, 2.0 * (sq - negatives.k), 1.0)
            epoch_energy += float(np.mean(per_row))
            n_batches += 1
            W = E.copy()
            if lam is not None:
                W[:, lv] *= lam
            G = -2.0 * (X.T @ W) / B
            if not graph.allow_self_edges:
                np.fill_diagonal(G, 0.0)
            if gain_prior is not None:
                _, prior_grad = gain_prior(A, epoch)
                G = G + prior_grad
            opt_g.step([G])
            if not graph.allow_self_edges:
                np.fill_diagonal(graph.gains, 0.0)
        row = {"epoch": epoch, "energy": epoch_energy / max(n_batches, 1)}
        if gain_prior is not None:
            values, _ = gain_prior(graph.gains, epoch)
            row.update(values)
        if epoch_callback is not None:
            extra = epoch_callback(epoch, graph)
            if extra:
                row.update(extra)
        trace.append(row)
    return TrainResult(graph=graph, trace=trace)


class _MixedTarget:
    """Per-row target: flagged rows use the contrastive label term with
    target k, the remaining rows keep the standard quadratic energy."""

    def __init__(self, label_vertex, k, neg_mask):
        self.label_vertex = label_vertex
        self.k = float(k)
        self.neg_mask = neg_mask

    def label_energy(self, e):
        sq = np.sum(e * e, axis=1)
        return np.where(self.neg_mask, (sq - self.k) ** 2, sq)

    def label_weights(self, e):
        sq = np.sum(e * e, axis=1)
        return np.where(self.neg_mask, 2.0 * (sq - self.k), 1.0)
