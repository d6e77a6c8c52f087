"""Causal inference on predictive coding graphs.

Value nodes relax against prediction errors to answer conditional queries;
clamping an intervened vertex's error to zero upgrades the same machinery to
interventions, and abduction over exogenous roots to counterfactuals.  The
gain matrix of a fully connected graph doubles as a continuously learnable
adjacency for structure discovery.
"""

from .activations import ACTIVATIONS, get_activation
from .graph import (DenseLinear, EnergyTarget, GraphError, GraphState, Mlp,
                    PCGraph, ScalarLinear, VertexSpec, build_graph, energy,
                    forward_sweep, init_state, predict, set_value)
from .dynamics import (AdamW, NegativeSampling, SGD, TrainConfig, TrainResult,
                       gain_grads, run_inference, train, value_grads,
                       value_step, weight_grads)
from .queries import (CONVERGED, QueryConfig, QueryResult, abduct_noise,
                      conditional_query, counterfactual_query,
                      interventional_query, mutilate)
from .scm import (CfDataset, CfPair, ClosedFormEq, FittedScm, LinearEq,
                  ScmSpec, abduct, augment_with_exogenous,
                  counterfactual_estimate, fit_scm, oracle_counterfactual,
                  oracle_sample, oracle_sample_with_noise, sample_fitted)
from .synthgen import (Benchmark, COMMON_GRAPHS, RandomGraphConfig,
                       assign_weights, common_graph, gen_random_dag,
                       intervention_grid, linear_spec_from_weights,
                       make_benchmark)
from .structlearn import (DiscoveryConfig, DiscoveryResult, EndToEndResult,
                          PriorConfig, acyclicity, discover,
                          discover_with_negatives, end_to_end, prior_penalty,
                          repair_cycles, threshold)
from .metrics import (GraphMetrics, counterfactual_metrics, descendant_sets,
                      graph_metrics, interventional_metrics, mae,
                      median_heuristic_bandwidths, mmd, shd_elementwise)
from .harness import (ExperimentConfig, component_rng, component_seed,
                      evaluate_fitted, load_dataset, run_experiment,
                      save_dataset)

__version__ = "0.1.0"
