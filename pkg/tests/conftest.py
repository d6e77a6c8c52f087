import numpy as np
import pytest

from causalpc.graph import (DenseLinear, Mlp, ScalarLinear, VertexSpec,
                            build_graph)

ACT_NAMES = ["identity", "relu", "tanh", "elu", "gelu"]


def random_dag_graph(rng, n_max=5, dim_max=3, edge_prob=0.6, mlp_hidden=(4,),
                     weight_scale=1.0):
    """Random DAG-structured PC graph mixing all edge kinds and activations."""
    n = int(rng.integers(2, n_max + 1))
    dims = rng.integers(1, dim_max + 1, size=n)
    verts = [VertexSpec(i, int(d)) for i, d in enumerate(dims)]
    edges = {}
    for j in range(1, n):
        for i in range(j):
            if rng.random() < edge_prob:
                kind = rng.integers(0, 3)
                act = ACT_NAMES[rng.integers(0, len(ACT_NAMES))]
                if kind == 0 and dims[i] == dims[j]:
                    edges[(i, j)] = ScalarLinear(weight_scale * rng.normal(),
                                                 activation=act)
                elif kind == 1:
                    edges[(i, j)] = DenseLinear(
                        weight_scale * rng.normal(size=(dims[j], dims[i])),
                        activation=act)
                else:
                    edges[(i, j)] = Mlp.init(int(dims[i]), int(dims[j]),
                                             hidden=mlp_hidden, activation=act,
                                             rng=rng)
    if not edges:
        edges[(0, 1)] = DenseLinear(rng.normal(size=(int(dims[1]), int(dims[0]))))
    g = build_graph(verts, edges)
    g.gains = g.gains * rng.normal(1.0, 0.5, size=g.gains.shape)
    return g


def randomize_values(state, rng):
    for i in range(len(state.values)):
        state.values[i] = rng.normal(size=state.values[i].shape)
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
