"""Recover a random DAG from observational data alone.

Samples an Erdos-Renyi DAG with signed uniform weights, generates linear
data, and trains a fully connected scalar PC graph whose gain matrix doubles
as the estimated weighted adjacency.  Sparsity and acyclicity penalties on
the gains prune it back to the generating structure.
"""

import numpy as np

from causalpc import (DiscoveryConfig, RandomGraphConfig, assign_weights,
                      discover, gen_random_dag, graph_metrics,
                      linear_spec_from_weights, oracle_sample)

rc = RandomGraphConfig(kind="ER", n_nodes=10, edges_per_node=1, seed=0)
A = gen_random_dag(rc)
W = assign_weights(A, rc.weight_range, seed=1)
spec = linear_spec_from_weights(W)
data = oracle_sample(spec, 2000, seed=2)
print(f"true graph: {int(A.sum())} edges on {rc.n_nodes} nodes")

config = DiscoveryConfig(seed=0, track_truth=W)
result = discover(data, config)

gm = graph_metrics(A, result.binary)
print(f"\nrecovered: shd={gm.shd} f1={gm.f1:.2f} "
      f"(tp={gm.confusion['tp']} r={gm.confusion['r']} fp={gm.confusion['fp']})")

print("\nweight estimates on true edges:")
for i, j in np.argwhere(A != 0):
    print(f"  x{i} -> x{j}: est {result.weighted[i, j]:+.3f}  true {W[i, j]:+.3f}")

mae_trace = result.trace_column("mae_vs_truth")
h_trace = result.trace_column("h")
for epoch in (0, 300, 600, 1200, 2400, len(mae_trace) - 1):
    print(f"  epoch {epoch:5d}: mae vs truth {mae_trace[epoch]:.4f}   "
          f"h(A) {h_trace[epoch]:.2e}")
print("\nthe energy converges early; direction resolution happens as the")
print("acyclicity weight ramps up, after which h(A) collapses to zero")
