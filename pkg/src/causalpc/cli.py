"""Command line interface.

Subcommands: generate, fit, query, discover, e2e, report.  Exit codes:
0 success, 1 configuration error, 2 runtime failure.  fit/discover/e2e accept
either direct flags (single run) or --config JSON (multi-seed experiment via
the harness); PC_CAUSAL_THREADS caps per-seed parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .dynamics import TrainConfig
from .graph import GraphError, PCGraph
from .harness import (ConfigError, ExperimentConfig, load_dataset,
                      run_experiment, reaggregate, save_cf_pairs, save_dataset,
                      save_trace_csv, write_json)
from .metrics import graph_metrics, mae
from .queries import CONVERGED, QueryConfig, conditional_query, interventional_query
from .scm import FittedScm, ScmSpec, augment_with_exogenous, fit_scm
from .structlearn import DiscoveryConfig, PriorConfig, discover
from .synthgen import (RandomGraphConfig, assign_weights, common_graph,
                       gen_random_dag, linear_spec_from_weights, make_benchmark)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="causalpc",
                description="Causal inference engine on predictive coding graphs")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write an SCM spec and datasets")
    g.add_argument("--kind", choices=["er", "sf", "common"], required=True)
    g.add_argument("--name", help="common graph name (for --kind common)")
    g.add_argument("--nodes", type=int, default=10)
    g.add_argument("--k", type=int, default=1, help="expected edges per node")
    g.add_argument("--regime", choices=["linear", "nonlinear"], default="linear")
    g.add_argument("--n-train", type=int, default=3000)
    g.add_argument("--n-test", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit structural equations to data")
    f.add_argument("--config", help="experiment config JSON (multi-seed)")
    f.add_argument("--spec", help="SCM spec JSON (adjacency source)")
    f.add_argument("--data", help="training CSV")
    f.add_argument("--regime", choices=["linear", "nonlinear"], default="linear")
    f.add_argument("--epochs", type=int, default=200)
    f.add_argument("--batch-size", type=int, default=128)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", help="output directory")

    q = sub.add_parser("query", help="run causal queries on a saved model")
    q.add_argument("--graph", required=True,
                   help="fitted model JSON (or raw graph JSON)")
    q.add_argument("--evidence", default="", help="comma list id=value")
    q.add_argument("--do", default="", help="comma list id=value")
    q.add_argument("--counterfactual",
                   help="CSV of factual endogenous rows (needs --do)")
    q.add_argument("--steps", type=int, default=None, help="inference steps")

    d = sub.add_parser("discover", help="learn structure from observational data")
    d.add_argument("--config", help="experiment config JSON (multi-seed)")
    d.add_argument("--data", help="observational CSV")
    d.add_argument("--lambda-l1", type=float, default=5e-6)
    d.add_argument("--lambda-l2", type=float, default=0.0)
    d.add_argument("--lambda-dag", type=float, default=200.0)
    d.add_argument("--omega", type=float, default=0.3)
    d.add_argument("--epochs", type=int, default=3600)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--truth", help="true weighted adjacency CSV (enables metric trace)")
    d.add_argument("--out", help="output directory")

    e = sub.add_parser("e2e", help="discover structure, fit, evaluate queries")
    e.add_argument("--config", help="experiment config JSON (multi-seed)")
    e.add_argument("--spec", help="SCM spec JSON (oracle for data + held-out tests)")
    e.add_argument("--n-train", type=int, default=3000)
    e.add_argument("--n-test", type=int, default=1000)
    e.add_argument("--discovery-epochs", type=int, default=3600)
    e.add_argument("--fit-epochs", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="output directory")

    r = sub.add_parser("report", help="rebuild report aggregates from per-seed entries")
    r.add_argument("--dir", required=True)
    return p


def _parse_assignments(text):
    out = {}
    if not text:
        return out
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            key, value = part.split("=")
            out[int(key)] = float(value)
        except ValueError:
            raise ConfigError(f"bad assignment {part!r}; expected id=value") from None
    return out


def cmd_generate(args):
    os.makedirs(args.out, exist_ok=True)
    if args.kind == "common":
        if not args.name:
            raise ConfigError("--kind common needs --name")
        spec = common_graph(args.name, args.regime, seed=args.seed)
    else:
        rc = RandomGraphConfig(kind=args.kind.upper(), n_nodes=args.nodes,
                               edges_per_node=args.k, seed=args.seed)
        A = gen_random_dag(rc)
        W = assign_weights(A, rc.weight_range, seed=args.seed + 1)
        spec = linear_spec_from_weights(W)
    spec.save(os.path.join(args.out, "spec.json"))
    bench = make_benchmark(spec, args.n_train, args.n_test, seed=args.seed)
    save_dataset(os.path.join(args.out, "train.csv"), bench.train)
    save_dataset(os.path.join(args.out, "test_obs.csv"), bench.test_obs)
    for j, by_value in sorted(bench.test_do.items()):
        for gi, (s, X) in enumerate(sorted(by_value.items())):
            save_dataset(os.path.join(args.out, f"test_do_v{j}_g{gi}.csv"), X)
    for j, by_value in sorted(bench.test_cf.items()):
        for gi, (s, cf) in enumerate(sorted(by_value.items())):
            save_cf_pairs(os.path.join(args.out, f"test_cf_v{j}_g{gi}.csv"), cf)
    print(json.dumps({"out": args.out, "n": spec.n,
                      "edges": int(np.sum(spec.adjacency != 0))}))
    return 0


def cmd_fit(args):
    if args.config:
        report = run_experiment(ExperimentConfig.load(args.config))
        print(json.dumps(report["aggregates"], sort_keys=True))
        return 0
    if not (args.spec and args.data and args.out):
        raise ConfigError("fit needs --config or (--spec, --data, --out)")
    spec = ScmSpec.load(args.spec)
    data = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)
    edge_kind = "scalar_linear" if args.regime == "linear" else "mlp"
    graph = augment_with_exogenous(spec.adjacency, edge_kind=edge_kind, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.seed)
    fitted, result = fit_scm(graph, data, cfg)
    fitted.save(os.path.join(args.out, "fitted_model.json"))
    save_trace_csv(os.path.join(args.out, "trace.csv"), result.trace)
    print(json.dumps({"out": args.out,
                      "final_energy": result.trace[-1]["energy"],
                      "noise_estimates": fitted.noise_estimates}))
    return 0


def _load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    if "graph" in payload:
        return FittedScm.from_json(payload)
    return PCGraph.from_json(payload)


def cmd_query(args):
    model = _load_model(args.graph)
    graph = model.graph if isinstance(model, FittedScm) else model
    config = CONVERGED if args.steps is None else \
        QueryConfig(T=args.steps, gamma=CONVERGED.gamma)
    evidence = _parse_assignments(args.evidence)
    do = _parse_assignments(args.do)

    if args.counterfactual:
        if not isinstance(model, FittedScm):
            raise ConfigError("counterfactual queries need a fitted model file")
        if not do:
            raise ConfigError("counterfactual queries need --do")
        rows = load_dataset(args.counterfactual)
        from .scm import counterfactual_estimate
        (dv, dval), = do.items()
        est = counterfactual_estimate(model, rows, dv, dval, config)
        out = {str(i): est[:, i].tolist() for i in range(est.shape[1])}
    elif do:
        res = interventional_query(graph, do, evidence or None, config)
        out = {str(v): res.values[v].ravel().tolist() for v in sorted(res.values)}
    else:
        res = conditional_query(graph, evidence, config)
        out = {str(v): res.values[v].ravel().tolist() for v in sorted(res.values)}
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_discover(args):
    if args.config:
        report = run_experiment(ExperimentConfig.load(args.config))
        print(json.dumps(report["aggregates"], sort_keys=True))
        return 0
    if not (args.data and args.out):
        raise ConfigError("discover needs --config or (--data, --out)")
    data = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)
    priors = PriorConfig(lambda_l1=args.lambda_l1, lambda_l2=args.lambda_l2,
                         lambda_dag=args.lambda_dag, omega=args.omega)
    # keep the acyclicity ramp phases proportional when epochs are overridden
    cfg = DiscoveryConfig(epochs=args.epochs, seed=args.seed, priors=priors,
                          dag_warmup=max(1, args.epochs // 6),
                          dag_ramp_every=max(1, args.epochs // 24))
    truth = load_dataset(args.truth) if args.truth else None
    if truth is not None:
        cfg.track_truth = truth
    res = discover(data, cfg)
    save_dataset(os.path.join(args.out, "weighted.csv"), res.weighted)
    save_dataset(os.path.join(args.out, "binary.csv"), res.binary)
    save_trace_csv(os.path.join(args.out, "trace.csv"), res.trace)
    report = {"omega": res.omega,
              "edges_found": int(np.sum(res.binary)),
              "final": {k: v for k, v in res.trace[-1].items()}}
    if truth is not None:
        gm = graph_metrics((truth != 0).astype(int), res.binary)
        report["graph_metrics"] = gm.to_json()
        report["mae_weighted"] = mae(truth, res.weighted)
    write_json(os.path.join(args.out, "report.json"), report)
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_e2e(args):
    if args.config:
        report = run_experiment(ExperimentConfig.load(args.config))
        print(json.dumps(report["aggregates"], sort_keys=True))
        return 0
    if not (args.spec and args.out):
        raise ConfigError("e2e needs --config or (--spec, --out)")
    ep = args.discovery_epochs
    config = ExperimentConfig(experiment="e2e",
                              graph={"source": "spec_file", "path": args.spec},
                              n_train=args.n_train, n_test=args.n_test,
                              seeds=[args.seed], out_dir=args.out,
                              discovery={"epochs": ep,
                                         "dag_warmup": max(1, ep // 6),
                                         "dag_ramp_every": max(1, ep // 24)},
                              train={"epochs": args.fit_epochs})
    report = run_experiment(config)
    print(json.dumps(report["aggregates"], sort_keys=True))
    return 0


def cmd_report(args):
    report = reaggregate(args.dir)
    print(json.dumps(report["aggregates"], sort_keys=True))
    return 0


_COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "query": cmd_query,
             "discover": cmd_discover, "e2e": cmd_e2e, "report": cmd_report}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, GraphError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
