"""Causal queries as clamp-mask configurations on a predictive coding graph.

Conditioning value-clamps the observed vertices and relaxes the rest.  An
intervention additionally pins the intervened vertex's error to zero, which
stops its mismatch from propagating backward to parents; this is equivalent
to conditioning on the graph with the vertex's incoming edges excised
(``mutilate`` provides that construction as an oracle for testing).
Counterfactuals run abduction / action / prediction on a fitted structural
model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import (GraphError, PCGraph, forward_sweep, init_state, predict,
                    set_value)
from .dynamics import run_inference


@dataclass
class QueryConfig:
    """Inference schedule for queries.

    Convergence is by fixed step count T; early_stop_tol optionally stops
    once the per-step energy decrease falls below it (off by default so runs
    are step-for-step reproducible).
    """

    T: int = 4000
    gamma: float = 0.02
    early_stop_tol: float = None
    init_forward_sweep: bool = True

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")


#: schedule tight enough for the exactness checks on linear models
CONVERGED = QueryConfig(T=200_000, gamma=0.02, early_stop_tol=1e-18)


@dataclass
class QueryResult:
    values: dict
    energy_trace: list = field(default_factory=list)

    def value(self, vertex):
        return self.values[vertex]

    def scalar(self, vertex):
        return float(np.asarray(self.values[vertex]).ravel()[0])


def _as_batch(assignments, graph):
    """Normalize evidence values and find a consistent batch size."""
    batch = 1
    normed = {}
    for v, val in assignments.items():
        if not 0 <= v < graph.n:
            raise GraphError(f"unknown vertex {v}")
        arr = np.atleast_1d(np.asarray(val, dtype=float))
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.shape[1] != graph.dims[v]:
            raise GraphError(
                f"vertex {v} expects dim {graph.dims[v]}, got {arr.shape[1]}")
        normed[v] = arr
        if arr.shape[0] > 1:
            if batch > 1 and arr.shape[0] != batch:
                raise GraphError("inconsistent batch sizes in assignments")
            batch = arr.shape[0]
    return normed, batch


def _prepare_state(graph, value_clamps, error_clamps, config):
    normed, batch = _as_batch(value_clamps, graph)
    state = init_state(graph, batch)
    for v, arr in normed.items():
        set_value(state, v, np.broadcast_to(arr, (batch, arr.shape[1])))
    for v in error_clamps:
        state.error_clamped[v] = True
    if config.init_forward_sweep and graph.is_acyclic():
        forward_sweep(graph, state)
    else:
        predict(graph, state)
    return state


def _result(graph, state, trace):
    return QueryResult({v: state.values[v].copy() for v in range(graph.n)}, trace)


def conditional_query(graph, evidence, config=None):
    """Rung 1: clamp the evidence vertices, relax everything else, and return
    the converged values (the conditional expectation under the model)."""
    config = config or QueryConfig()
    state = _prepare_state(graph, evidence, (), config)
    state, trace = run_inference(graph, state, config,
                                 early_stop_tol=config.early_stop_tol)
    return _result(graph, state, trace)


def interventional_query(graph, do, evidence=None, config=None):
    """Rung 2: value-clamp AND error-clamp the do-vertices, value-clamp any
    additional evidence normally, then relax.

    The error clamp removes the do-vertex's influence on its parents, so no
    graph surgery is needed.
    """
    config = config or QueryConfig()
    evidence = evidence or {}
    overlap = set(do) & set(evidence)
    if overlap:
        raise GraphError(f"vertices {sorted(overlap)} appear in both do and evidence")
    state = _prepare_state(graph, {**do, **evidence}, tuple(do), config)
    state, trace = run_inference(graph, state, config,
                                 early_stop_tol=config.early_stop_tol)
    return _result(graph, state, trace)


def mutilate(graph, do_vertices):
    """Copy of the graph with every incoming edge of each do-vertex removed.

    This is the textbook construction; it exists as an independent oracle for
    the equivalence tests against ``interventional_query``.
    """
    do_set = set(do_vertices)
    for v in do_set:
        if not 0 <= v < graph.n:
            raise GraphError(f"unknown vertex {v}")
    edges = {key: fn for key, fn in graph.edges.items() if key[1] not in do_set}
    gains = graph.gains.copy()
    for (i, j) in graph.edges:
        if j in do_set:
            gains[i, j] = 0.0
    return PCGraph(graph.vertices, edges, gains, allow_self_edges=graph.allow_self_edges)


def counterfactual_query(fitted, factual_evidence, do, config=None,
                         abduction_config=None):
    """Rung 3 on a fitted structural model, in three steps.

    1. Abduction: clamp every endogenous vertex to its factual value and
       relax the exogenous roots to recover the noise that explains the data.
       The exogenous errors are clamped to zero during this step so the
       recovered value is the full residual rather than a prior-shrunk one.
    2. Action: clamp the exogenous vertices to the recovered noise and apply
       the intervention (value + error clamp).
    3. Prediction: relax the remaining endogenous vertices.
    """
    config = config or CONVERGED
    abduction_config = abduction_config or config
    graph = fitted.graph
    endo = list(fitted.endogenous_ids)
    missing = [v for v in endo if v not in factual_evidence]
    if missing:
        raise GraphError(f"factual evidence missing endogenous vertices {missing}")
    for v in do:
        if v not in endo:
            raise GraphError(f"do-vertex {v} is not an endogenous vertex")

    exo_values = abduct_noise(fitted, factual_evidence, abduction_config)

    # action + prediction
    state = _prepare_state(graph, {**exo_values, **do}, tuple(do), config)
    state, trace = run_inference(graph, state, config,
                                 early_stop_tol=config.early_stop_tol)
    return _result(graph, state, trace)


def abduct_noise(fitted, factual_evidence, config=None):
    """Infer exogenous values explaining a factual endogenous assignment.
    Returns {exogenous vertex id: (B, d) array}."""
    config = config or CONVERGED
    graph = fitted.graph
    exo = list(fitted.exogenous_ids)
    state = _prepare_state(graph, dict(factual_evidence), tuple(exo), config)
    state, _ = run_inference(graph, state, config,
                             early_stop_tol=config.early_stop_tol)
    return {v: state.values[v].copy() for v in exo}
