"""Command line for the full pipeline: simulate, fit, summarize, predict, check.

Every command writes its outputs under ``--out`` (or ``$LAYERSBM_OUT``)
together with a manifest that pins inputs, configuration and seeds, so any
run can be reproduced bit for bit.  Exit codes: 0 on success, 1 on usage
errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .checks import SUITES, run_suite
from .network import load_network
from .posterior import min_vi_estimate, similarity, similarity_to_pgm, vi_distance, waic
from .predict import (
    edge_probabilities,
    joint_config_logprob,
    predictive_coclustering,
    sample_augmented_partitions,
)
from .priors import PriorSpec
from .sampler import SamplerConfig, run_chains
from .simulate import generate_scenario, scenario_spec
from .traceio import load_traces, round_sig, save_traces, write_manifest

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _default_out():
    return os.environ.get("LAYERSBM_OUT", ".")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_matrix_csv(path, matrix, fmt="%.12g"):
    np.savetxt(path, np.asarray(matrix), delimiter=",", fmt=fmt)


def _prior_from_args(args) -> PriorSpec:
    if args.prior == "hdp":
        return PriorSpec.hdp(args.theta, args.theta0)
    if args.prior == "hnsp":
        return PriorSpec.hnsp(args.sigma, args.sigma0)
    if args.prior == "hdp-hyper":
        return PriorSpec.hdp_hyper(args.alpha, args.beta, args.alpha0, args.beta0)
    if args.prior == "generic":
        # exercises the generic evaluator path with Dirichlet kernels inside
        from .checks import generic_twin

        return generic_twin(PriorSpec.hdp(args.theta, args.theta0))
    raise ValueError(f"unknown prior {args.prior!r}")


def _prior_from_manifest(manifest) -> PriorSpec:
    prior = manifest["config"]["prior"]
    if prior["family"] == "dp":
        return PriorSpec.hdp(prior["theta"], prior["theta0"])
    if prior["family"] == "nsp":
        return PriorSpec.hnsp(prior["sigma"], prior["sigma0"])
    raise ValueError(
        "the trace was fitted with a generic prior; re-fit with hdp / hnsp to predict"
    )


def cmd_simulate(args):
    out = args.out
    os.makedirs(out, exist_ok=True)
    psi = np.loadtxt(args.psi, delimiter=",") if args.psi else None
    spec = scenario_spec(args.scenario, seed=args.seed, psi=psi)
    net, z0 = generate_scenario(spec)
    edge_path = os.path.join(out, "edges.txt")
    layer_path = os.path.join(out, "layers.txt")
    with open(edge_path, "w", encoding="utf-8") as fh:
        for a, b in np.argwhere(np.triu(net.adjacency, 1)):
            fh.write(f"{net.node_ids[a]} {net.node_ids[b]}\n")
    with open(layer_path, "w", encoding="utf-8") as fh:
        for v in range(net.num_nodes):
            fh.write(f"{net.node_ids[v]}\t{net.layer_labels[net.layer_of[v]]}\n")
    _write_csv(
        os.path.join(out, "z0.csv"),
        ["node_id", "group"],
        [[net.node_ids[v], int(z0[v])] for v in range(net.num_nodes)],
    )
    _write_matrix_csv(os.path.join(out, "psi.csv"), spec.psi)
    write_manifest(
        out,
        {
            "command": "simulate",
            "version": __version__,
            "scenario": args.scenario,
            "seed": args.seed,
            "psi_file": args.psi,
            "layer_sizes": [int(s) for s in spec.layer_sizes],
            "num_groups": spec.num_groups,
            "num_edges": net.num_edges,
        },
    )
    print(f"wrote {net.num_nodes} nodes, {net.num_edges} edges to {out}")
    return 0


def cmd_fit(args):
    net = load_network(args.edges, args.layers)
    prior = _prior_from_args(args)
    cfg = SamplerConfig(
        prior=prior,
        a=args.a,
        b=args.b,
        n_iter=args.iters,
        n_burn=args.burnin,
        thin=args.thin,
        seed=args.seed,
        init=args.init,
        prior_only=args.prior_only,
        random_scan=args.random_scan,
    )
    t0 = time.perf_counter()
    traces = run_chains(net, cfg, args.chains)
    elapsed = time.perf_counter() - t0
    save_traces(traces, args.out)
    write_manifest(
        args.out,
        {
            "command": "fit",
            "version": __version__,
            "edges": os.path.abspath(args.edges),
            "layers": os.path.abspath(args.layers),
            "layer_sizes": [int(s) for s in net.layer_sizes],
            "layer_labels": list(net.layer_labels),
            "node_ids": list(net.node_ids),
            "chains": args.chains,
            "config": cfg.describe(),
            "wall_time_s": elapsed,
        },
    )
    kept = sum(len(t) for t in traces)
    print(f"fit: {args.chains} chain(s), {kept} retained samples, {elapsed:.1f}s -> {args.out}")
    return 0


def _load_truth(path, node_ids):
    by_id = {}
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header and header[0] != "node_id":
            fh.seek(0)
            reader = csv.reader(fh)
        for row in reader:
            if row:
                by_id[row[0]] = int(row[1])
    return np.array([by_id[nid] for nid in node_ids], dtype=np.int64)


def cmd_summarize(args):
    trace, manifest = load_traces(args.trace)
    edges = args.edges or manifest["edges"]
    layers = args.layers or manifest["layers"]
    net = load_network(edges, layers)
    sim = similarity(trace)
    truth = _load_truth(args.truth, manifest["node_ids"]) if args.truth else None
    summary = min_vi_estimate(
        sim, trace, alpha=args.alpha, refine=args.refine, reference=truth
    )
    waic_parts = waic(trace, net, manifest["config"]["a"], manifest["config"]["b"])
    os.makedirs(args.out, exist_ok=True)
    _write_matrix_csv(os.path.join(args.out, "similarity.csv"), sim)
    order = np.argsort(summary.z_hat, kind="stable")
    with open(os.path.join(args.out, "similarity.pgm"), "w", encoding="utf-8") as fh:
        fh.write(similarity_to_pgm(sim, order))
    report = {
        "z_hat": summary.z_hat.tolist(),
        "H_hat": summary.h_hat,
        "ball_radius": summary.ball_radius,
        "vi_to_ball_bound": vi_distance(summary.z_hat, summary.z_ball),
        "credible_level": summary.credible_level,
        "H_median": summary.h_median,
        "H_quartiles": list(summary.h_quartiles),
        "waic": waic_parts["waic"],
        "lppd": waic_parts["lppd"],
        "p_waic": waic_parts["p_waic"],
        "num_samples": len(trace),
    }
    if truth is not None:
        report["vi_to_truth"] = summary.vi_to_reference
        report["expected_vi_to_truth"] = summary.expected_vi_to_reference
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(round_sig(report), fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_manifest(
        args.out,
        {
            "command": "summarize",
            "version": __version__,
            "trace": os.path.abspath(args.trace),
            "alpha": args.alpha,
            "truth": os.path.abspath(args.truth) if args.truth else None,
        },
    )
    print(
        f"summarize: H_hat={summary.h_hat}, ball radius={summary.ball_radius:.3f}, "
        f"WAIC={waic_parts['waic']:.1f} -> {args.out}"
    )
    return 0


def cmd_predict(args):
    trace, manifest = load_traces(args.trace)
    net = load_network(args.edges, args.layers)
    prior = _prior_from_manifest(manifest)
    with open(args.new_layers, "r", encoding="utf-8") as fh:
        new_layers = [line.split()[-1] for line in fh if line.strip()]
    rng = np.random.default_rng(args.seed)
    os.makedirs(args.out, exist_ok=True)

    aug = predictive_coclustering(trace, net, new_layers, prior)
    _write_matrix_csv(os.path.join(args.out, "similarity_augmented.csv"), aug)
    probs = edge_probabilities(trace, net, new_layers, prior, rng,
                               manifest["config"]["a"], manifest["config"]["b"])
    _write_matrix_csv(os.path.join(args.out, "edge_probabilities.csv"), probs)
    draws = sample_augmented_partitions(trace, net, new_layers, prior, rng)
    summary = min_vi_estimate(aug, draws)
    report = {
        "new_layers": new_layers,
        "z_new_hat": summary.z_hat[net.num_nodes :].tolist(),
        "similarity_csv": "similarity_augmented.csv",
        "edge_probabilities_csv": "edge_probabilities.csv",
        "num_samples": len(trace),
    }
    if args.config:
        config = np.loadtxt(args.config, delimiter=",", ndmin=2)
        report["joint_config_logprob"] = joint_config_logprob(
            trace, net, new_layers, config, prior, rng,
            manifest["config"]["a"], manifest["config"]["b"]
        )
    with open(os.path.join(args.out, "prediction.json"), "w", encoding="utf-8") as fh:
        json.dump(round_sig(report), fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_manifest(
        args.out,
        {
            "command": "predict",
            "version": __version__,
            "trace": os.path.abspath(args.trace),
            "edges": os.path.abspath(args.edges),
            "layers": os.path.abspath(args.layers),
            "new_layers": os.path.abspath(args.new_layers),
            "seed": args.seed,
        },
    )
    print(f"predict: {len(new_layers)} new node(s) -> {args.out}")
    return 0


def cmd_check(args):
    results = run_suite(args.suite, max_n=args.max_n, seed=args.seed)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else RUNTIME_EXIT


def build_parser() -> _Parser:
    parser = _Parser(prog="layersbm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a benchmark scenario network")
    p_sim.add_argument("--scenario", type=int, choices=[1, 2], required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default=_default_out())
    p_sim.add_argument("--psi", help="CSV with a custom block probability matrix")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="run the collapsed Gibbs sampler")
    p_fit.add_argument("--edges", required=True)
    p_fit.add_argument("--layers", required=True)
    p_fit.add_argument("--prior", choices=["hdp", "hnsp", "hdp-hyper", "generic"], default="hdp")
    p_fit.add_argument("--theta", type=float, default=0.5)
    p_fit.add_argument("--theta0", type=float, default=4.0)
    p_fit.add_argument("--sigma", type=float, default=0.2)
    p_fit.add_argument("--sigma0", type=float, default=0.8)
    p_fit.add_argument("--alpha", type=float, default=5.0)
    p_fit.add_argument("--beta", type=float, default=10.0)
    p_fit.add_argument("--alpha0", type=float, default=12.0)
    p_fit.add_argument("--beta0", type=float, default=3.0)
    p_fit.add_argument("--a", type=float, default=1.0)
    p_fit.add_argument("--b", type=float, default=1.0)
    p_fit.add_argument("--iters", type=int, default=10_000)
    p_fit.add_argument("--burnin", type=int, default=2_000)
    p_fit.add_argument("--thin", type=int, default=1)
    p_fit.add_argument("--chains", type=int, default=1)
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--init", choices=["singletons", "one-block"], default="singletons")
    p_fit.add_argument("--prior-only", action="store_true")
    p_fit.add_argument("--random-scan", action="store_true")
    p_fit.add_argument("--out", default=_default_out())
    p_fit.set_defaults(func=cmd_fit)

    p_sum = sub.add_parser("summarize", help="posterior summaries from a trace directory")
    p_sum.add_argument("--trace", required=True)
    p_sum.add_argument("--truth", help="CSV of true allocations (node_id,group)")
    p_sum.add_argument("--alpha", type=float, default=0.05)
    p_sum.add_argument("--edges", help="override the edge file recorded in the manifest")
    p_sum.add_argument("--layers", help="override the layer file recorded in the manifest")
    p_sum.add_argument("--refine", action="store_true", help="greedy refinement of the estimate")
    p_sum.add_argument("--out", default=_default_out())
    p_sum.set_defaults(func=cmd_summarize)

    p_pred = sub.add_parser("predict", help="k-step-ahead prediction for unseen nodes")
    p_pred.add_argument("--trace", required=True)
    p_pred.add_argument("--edges", required=True)
    p_pred.add_argument("--layers", required=True)
    p_pred.add_argument("--new-layers", required=True, help="file with one layer label per new node")
    p_pred.add_argument("--config", help="CSV of a full new-edge configuration to score")
    p_pred.add_argument("--seed", type=int, default=0)
    p_pred.add_argument("--out", default=_default_out())
    p_pred.set_defaults(func=cmd_predict)

    p_chk = sub.add_parser("check", help="run the enumeration-oracle validation suites")
    p_chk.add_argument("--suite", choices=sorted(SUITES), required=True)
    p_chk.add_argument("--max-n", type=int, default=8)
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, AssertionError) as exc:
        print(f"layersbm: error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
