"""Reproducible experiment driver.

One global seed per run derives per-component streams through a fixed
counter-based splitting scheme, so adding a component never perturbs the
randomness of another.  Every experiment writes per-seed artifacts into its
own subdirectory plus an aggregate report.json whose bytes are a pure
function of (config, seeds), wall-clock field excluded.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import TrainConfig
from .metrics import (counterfactual_metrics, graph_metrics,
                      interventional_metrics, mae, mmd)
from .queries import CONVERGED, QueryConfig
from .scm import (FittedScm, ScmSpec, abduct, augment_with_exogenous,
                  counterfactual_estimate, fit_scm, oracle_sample, sample_fitted)
from .structlearn import DiscoveryConfig, PriorConfig, discover, \
    discover_with_negatives, repair_cycles
from .synthgen import (RandomGraphConfig, assign_weights, common_graph,
                       gen_random_dag, linear_spec_from_weights, make_benchmark)

#: component indices for the counter-based seed split
STREAMS = {"data": 0, "weights": 1, "init": 2, "train": 3, "sampling": 4, "toy": 5}


def component_seed(seed, component):
    """Stable derived seed for one component of a run."""
    ss = np.random.SeedSequence(seed, spawn_key=(STREAMS[component],))
    return int(ss.generate_state(1)[0])


def component_rng(seed, component):
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(STREAMS[component],)))


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# Dataset and trace I/O
# ---------------------------------------------------------------------------

def save_dataset(path, X, header=None):
    """CSV with header x1..xN; floats printed with 17 significant digits so a
    round trip is bit-exact."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    names = header or [f"x{i + 1}" for i in range(X.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in X:
            writer.writerow([f"{v:.17g}" for v in row])


def load_dataset(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return np.zeros((0, 0))
        width = len(header)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width:
                raise ConfigError(f"{path}:{lineno}: expected {width} cells, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    return np.array(rows, dtype=float).reshape(len(rows), width)


def save_cf_pairs(path, cf):
    """Counterfactual pairs: factual columns x*, counterfactual columns x_cf*,
    then do_vertex and do_value."""
    n, d = cf.factual.shape
    names = [f"x{i + 1}" for i in range(d)] + [f"x_cf{i + 1}" for i in range(d)] \
        + ["do_vertex", "do_value"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(n):
            row = [f"{v:.17g}" for v in cf.factual[i]]
            row += [f"{v:.17g}" for v in cf.counterfactual[i]]
            row += [str(cf.do_vertex), f"{cf.do_values[i]:.17g}"]
            writer.writerow(row)


def save_trace_csv(path, trace):
    """Per-epoch trace rows (dicts) as CSV; column set is the union over rows."""
    keys = []
    for row in trace:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for row in trace:
            writer.writerow([_fmt_cell(row.get(k)) for k in keys])


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(canonical_json(obj))


# ---------------------------------------------------------------------------
# Model evaluation against an oracle benchmark
# ---------------------------------------------------------------------------

def interventional_mean_mae(fitted, bench, seed, config=None):
    """Absolute error between true and model interventional means, averaged
    over descendants of each intervened vertex and over the grid; the model
    draws use a fixed stream so checkpoint-to-checkpoint differences reflect
    parameter movement only."""
    config = config or CONVERGED
    errs = []
    for j, by_value in sorted(bench.test_do.items()):
        des = bench.spec.descendants(j)
        if not des:
            continue
        for gi, (s, Xt) in enumerate(sorted(by_value.items())):
            est = sample_fitted(fitted, Xt.shape[0], intervention=(j, s),
                                seed=component_seed(seed, "sampling") + 97 * j + gi,
                                config=config)
            errs.append(np.mean(np.abs(np.mean(Xt[:, des], axis=0)
                                       - np.mean(est[:, des], axis=0))))
    return float(np.mean(errs))


def evaluate_fitted(fitted, bench, seed, config=None):
    """Association / intervention / counterfactual metrics of a fitted model
    against the oracle benchmark."""
    config = config or CONVERGED
    spec = bench.spec
    out = {}

    # association: generative samples vs held-out data, abducted noise vs truth
    n_obs = bench.test_obs.shape[0]
    model_obs = sample_fitted(fitted, n_obs, seed=component_seed(seed, "sampling"),
                              config=config)
    out["obs_mmd"] = mmd(bench.test_obs, model_obs)
    noise_hat = abduct(fitted, bench.test_obs, config)
    out["obs_noise_mae"] = mae(bench.test_obs_noise, noise_hat)

    # interventions: metrics pooled per intervened vertex, MMD per grid value
    true_do, est_do = {}, {}
    do_mmds = []
    for j, by_value in sorted(bench.test_do.items()):
        true_pool, est_pool = [], []
        des = spec.descendants(j)
        for gi, (s, Xt) in enumerate(sorted(by_value.items())):
            est = sample_fitted(fitted, Xt.shape[0], intervention=(j, s),
                                seed=component_seed(seed, "sampling") + 10_000
                                + 97 * j + gi, config=config)
            true_pool.append(Xt)
            est_pool.append(est)
            if des:
                do_mmds.append(mmd(Xt[:, des], est[:, des]))
        true_do[j] = np.vstack(true_pool)
        est_do[j] = np.vstack(est_pool)
    mean_e, std_e = interventional_metrics(true_do, est_do, spec.adjacency)
    out["do_mean_e"] = mean_e
    out["do_std_e"] = std_e
    out["do_mmd"] = float(np.mean(do_mmds))
    out["do_mean_mae"] = interventional_mean_mae(fitted, bench, seed, config)

    # counterfactuals: matched pairs share the exogenous draw
    true_cf, est_cf = {}, {}
    abs_err_sum = np.zeros(spec.n)
    abs_err_cnt = np.zeros(spec.n)
    for j, by_value in sorted(bench.test_cf.items()):
        t_pool, e_pool = [], []
        for s, cfdata in sorted(by_value.items()):
            est = counterfactual_estimate(fitted, cfdata.factual, j, s, config)
            t_pool.append(cfdata.counterfactual)
            e_pool.append(est)
            des = spec.descendants(j)
            err = np.abs(cfdata.counterfactual[:, des] - est[:, des])
            abs_err_sum[des] += err.sum(axis=0)
            abs_err_cnt[des] += err.shape[0]
        true_cf[j] = np.vstack(t_pool)
        est_cf[j] = np.vstack(e_pool)
    cf_mse, cf_sse = counterfactual_metrics(true_cf, est_cf, spec.adjacency)
    out["cf_mse"] = cf_mse
    out["cf_sse"] = cf_sse
    evaluated = abs_err_cnt > 0
    per_node = abs_err_sum[evaluated] / abs_err_cnt[evaluated]
    out["cf_mae"] = float(np.mean(per_node))
    stds = bench.train.std(axis=0)[evaluated]
    out["cf_mae_node_max_norm"] = float(np.max(per_node / stds))
    return out


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

EXPERIMENTS = ("fit_and_query", "discover", "e2e", "negatives_toy")


@dataclass
class ExperimentConfig:
    experiment: str
    graph: dict = field(default_factory=lambda: {"source": "common", "name": "chain"})
    regime: str = "linear"
    n_train: int = 3000
    n_test: int = 1000
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out_dir: str = "results"
    train: dict = field(default_factory=dict)       # TrainConfig overrides
    discovery: dict = field(default_factory=dict)   # DiscoveryConfig overrides
    priors: dict = field(default_factory=dict)      # PriorConfig overrides
    query: dict = field(default_factory=dict)       # QueryConfig overrides
    checkpoint_every: int = 0                       # fit_and_query: eval cadence
    toy: dict = field(default_factory=dict)         # negatives_toy parameters
    write_datasets: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"known: {EXPERIMENTS}")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields {sorted(unknown)}")
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment' field")
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def train_config(self, seed):
        return TrainConfig(**{"seed": component_seed(seed, "train"), **self.train})

    def discovery_config(self, seed):
        kw = dict(self.discovery)
        kw["priors"] = PriorConfig(**self.priors)
        kw["seed"] = component_seed(seed, "train")
        return DiscoveryConfig(**kw)

    def query_config(self):
        if not self.query:
            return CONVERGED
        return QueryConfig(**self.query)


def build_spec(config, seed):
    """Resolve the graph source into an ScmSpec for one run seed."""
    g = config.graph
    source = g.get("source", "common")
    if source == "common":
        return common_graph(g["name"], config.regime,
                            seed=component_seed(seed, "weights"),
                            noise=[tuple(x) for x in g["noise"]] if "noise" in g else None)
    if source == "random":
        rc = RandomGraphConfig(kind=g.get("kind", "ER"),
                               n_nodes=g.get("n_nodes", 10),
                               edges_per_node=g.get("edges_per_node", 1),
                               weight_range=tuple(g.get("weight_range", (0.5, 2.0))),
                               seed=component_seed(seed, "data"))
        A = gen_random_dag(rc)
        W = assign_weights(A, rc.weight_range, seed=component_seed(seed, "weights"))
        return linear_spec_from_weights(W)
    if source == "spec_file":
        return ScmSpec.load(g["path"])
    raise ConfigError(f"unknown graph source {source!r}")


# ---------------------------------------------------------------------------
# Per-seed experiment bodies
# ---------------------------------------------------------------------------

def _seed_dir(config, seed):
    d = os.path.join(config.out_dir, f"seed_{seed}")
    os.makedirs(d, exist_ok=True)
    return d

def _true_weight_matrix(spec):
    W = np.zeros((spec.n, spec.n))
    for i, eq in enumerate(spec.equations):
        if hasattr(eq, "weights"):
            for j, w in eq.weights.items():
                W[j, i] = w
    return W


def run_fit_and_query_seed(config, seed):
    spec = build_spec(config, seed)
    bench = make_benchmark(spec, config.n_train, config.n_test,
                           seed=component_seed(seed, "data"))
    edge_kind = "scalar_linear" if config.regime == "linear" else "mlp"
    graph = augment_with_exogenous(spec.adjacency, edge_kind=edge_kind,
                                   seed=component_seed(seed, "init"))
    checkpoints = []

    def callback(epoch, g):
        if not config.checkpoint_every:
            return None
        if epoch != 0 and (epoch + 1) % config.checkpoint_every:
            return None
        snap = FittedScm(g, [])
        noise = abduct(snap, bench.train, config.query_config())
        snap.noise_estimates = [(float(np.mean(noise[:, i])), float(np.std(noise[:, i])))
                                for i in range(snap.n)]
        err = interventional_mean_mae(snap, bench, seed, config.query_config())
        checkpoints.append({"epoch": epoch, "do_mean_mae": err})
        return {"do_mean_mae": err}

    fitted, result = fit_scm(graph, bench.train, config.train_config(seed),
                             abduction_config=config.query_config(),
                             epoch_callback=callback)
    metrics = evaluate_fitted(fitted, bench, seed, config.query_config())

    sd = _seed_dir(config, seed)
    save_trace_csv(os.path.join(sd, "trace.csv"), result.trace)
    fitted.save(os.path.join(sd, "fitted_model.json"))
    spec.save(os.path.join(sd, "spec.json"))
    if config.write_datasets:
        save_dataset(os.path.join(sd, "train.csv"), bench.train)
        save_dataset(os.path.join(sd, "test_obs.csv"), bench.test_obs)
    return {"metrics": metrics, "checkpoints": checkpoints,
            "traces": {"train": os.path.join(f"seed_{seed}", "trace.csv")}}


def run_discover_seed(config, seed):
    spec = build_spec(config, seed)
    data = oracle_sample(spec, config.n_train, seed=component_seed(seed, "data"))
    dcfg = config.discovery_config(seed)
    dcfg.track_truth = _true_weight_matrix(spec)
    res = discover(data, dcfg)
    gm = graph_metrics(spec.adjacency, res.binary)
    metrics = {"shd": gm.shd, "f1": gm.f1, "fdr": gm.fdr, "tpr": gm.tpr,
               "fpr": gm.fpr, "nnz": gm.nnz,
               "mae_weighted": mae(_true_weight_matrix(spec), res.weighted)}
    sd = _seed_dir(config, seed)
    save_trace_csv(os.path.join(sd, "trace.csv"), res.trace)
    save_dataset(os.path.join(sd, "weighted.csv"), res.weighted)
    save_dataset(os.path.join(sd, "binary.csv"), res.binary)
    return {"metrics": metrics,
            "traces": {"discovery": os.path.join(f"seed_{seed}", "trace.csv")}}


def run_e2e_seed(config, seed):
    spec = build_spec(config, seed)
    bench = make_benchmark(spec, config.n_train, config.n_test,
                           seed=component_seed(seed, "data"))
    res = discover(bench.train, config.discovery_config(seed))
    binary, removed = repair_cycles(res.binary, res.weighted)
    gm = graph_metrics(spec.adjacency, binary)
    edge_kind = "scalar_linear" if config.regime == "linear" else "mlp"
    graph = augment_with_exogenous(binary, edge_kind=edge_kind,
                                   seed=component_seed(seed, "init"))
    fitted, fit_result = fit_scm(graph, bench.train, config.train_config(seed),
                                 abduction_config=config.query_config())
    metrics = {"shd": gm.shd, "f1": gm.f1, "nnz": gm.nnz,
               "repaired_edges": len(removed)}
    metrics.update(evaluate_fitted(fitted, bench, seed, config.query_config()))
    sd = _seed_dir(config, seed)
    save_trace_csv(os.path.join(sd, "discovery_trace.csv"), res.trace)
    save_trace_csv(os.path.join(sd, "fit_trace.csv"), fit_result.trace)
    save_dataset(os.path.join(sd, "weighted.csv"), res.weighted)
    save_dataset(os.path.join(sd, "binary.csv"), binary)
    fitted.save(os.path.join(sd, "fitted_model.json"))
    return {"metrics": metrics,
            "traces": {"discovery": os.path.join(f"seed_{seed}", "discovery_trace.csv"),
                       "fit": os.path.join(f"seed_{seed}", "fit_trace.csv")}}


def make_toy_task(seed, n=1000, input_scale=0.5, slope=1.5, label_noise=0.1):
    """Two observed inputs and one label that is a noisy linear function of
    the first input; scaled so the degenerate self-predicting structure and
    its negative-sample fix are both observable."""
    rng = component_rng(seed, "toy")
    x0 = input_scale * rng.normal(size=n)
    x1 = input_scale * rng.normal(size=n)
    y = slope * x0 + label_noise * rng.normal(size=n)
    return np.column_stack([x0, x1]), y


def run_negatives_toy_seed(config, seed):
    toy = config.toy
    data, labels = make_toy_task(seed, n=toy.get("n", 1000),
                                 input_scale=toy.get("input_scale", 0.5),
                                 slope=toy.get("slope", 1.5),
                                 label_noise=toy.get("label_noise", 0.1))
    label_vertex = data.shape[1]
    base_priors = {"lambda_l1": 5e-6, "lambda_dag": 0.0, **config.priors}
    dcfg_kw = {"epochs": 1500, "batch_size": 128, **config.discovery}

    plain = discover_with_negatives(data, labels, DiscoveryConfig(
        seed=component_seed(seed, "train"),
        priors=PriorConfig(**base_priors), **dcfg_kw))
    ns = toy.get("negative_samples", {"p_ns": 0.1, "k": 1.0})
    contrastive = discover_with_negatives(data, labels, DiscoveryConfig(
        seed=component_seed(seed, "train"),
        priors=PriorConfig(negative_samples=ns, **base_priors), **dcfg_kw))

    inc_plain = np.abs(plain.weighted[:, label_vertex])
    inc_neg = np.abs(contrastive.weighted[:, label_vertex])
    metrics = {
        "plain_self_gain": float(inc_plain[label_vertex]),
        "plain_input_gain": float(inc_plain[0]),
        "plain_self_dominates": float(np.argmax(inc_plain) == label_vertex),
        "neg_self_gain": float(inc_neg[label_vertex]),
        "neg_input_gain": float(inc_neg[0]),
        "neg_input_dominates": float(np.argmax(inc_neg) == 0),
    }
    sd = _seed_dir(config, seed)
    save_dataset(os.path.join(sd, "weighted_plain.csv"), plain.weighted)
    save_dataset(os.path.join(sd, "weighted_negatives.csv"), contrastive.weighted)
    return {"metrics": metrics, "traces": {}}


_SEED_RUNNERS = {
    "fit_and_query": run_fit_and_query_seed,
    "discover": run_discover_seed,
    "e2e": run_e2e_seed,
    "negatives_toy": run_negatives_toy_seed,
}


def _run_seed_entry(payload):
    config_dict, seed = payload
    config = ExperimentConfig.from_json(config_dict)
    out = _SEED_RUNNERS[config.experiment](config, seed)
    out["seed"] = seed
    return out


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def aggregate(per_seed):
    """Mean/std over seeds for every scalar metric, raw and x100."""
    keys = sorted({k for entry in per_seed for k in entry["metrics"]})
    agg = {}
    for k in keys:
        vals = np.array([entry["metrics"][k] for entry in per_seed
                         if k in entry["metrics"]], dtype=float)
        agg[k] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)),
                  "mean_x100": float(100 * np.mean(vals)),
                  "std_x100": float(100 * np.std(vals))}
    return agg


def max_workers():
    raw = os.environ.get("PC_CAUSAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"PC_CAUSAL_THREADS must be an integer, got {raw!r}")


def run_experiment(config):
    """Execute the configured experiment for every seed and write report.json.

    Deterministic per (config, seeds): re-running produces byte-identical
    artifacts apart from the wall-clock field.
    """
    t0 = time.time()
    os.makedirs(config.out_dir, exist_ok=True)
    payloads = [(config.to_json(), seed) for seed in config.seeds]
    workers = max_workers()
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_run_seed_entry, payloads))
    else:
        per_seed = [_run_seed_entry(p) for p in payloads]
    per_seed.sort(key=lambda e: e["seed"])
    report = {
        "config": config.to_json(),
        "per_seed": per_seed,
        "aggregates": aggregate(per_seed),
        "wall_clock_s": round(time.time() - t0, 3),
    }
    write_json(os.path.join(config.out_dir, "report.json"), report)
    return report


def reaggregate(out_dir):
    """Rebuild report.json aggregates from the per-seed entries on disk."""
    path = os.path.join(out_dir, "report.json")
    with open(path) as fh:
        report = json.load(fh)
    report["aggregates"] = aggregate(report["per_seed"])
    write_json(path, report)
    return report
