"""On-disk format for traces and run manifests.

One CSV per chain holds the retained sweeps (sweep index, occupied-profile
count, log likelihood, the two level parameters, then the allocation vector);
a companion CSV carries the subgroup vectors the predictive urns condition
on.  A JSON manifest records the full configuration, seeds and input paths,
enough to re-run the command bit for bit.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .sampler import SampleTrace

__all__ = ["save_traces", "load_traces", "write_manifest", "read_manifest", "round_sig"]


def round_sig(value, digits: int = 12):
    """Recursively round floats to ``digits`` significant decimal digits."""
    if isinstance(value, float):
        if not math.isfinite(value):
            return value
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: round_sig(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v, digits) for v in value]
    if isinstance(value, np.generic):
        return round_sig(value.item(), digits)
    if isinstance(value, np.ndarray):
        return round_sig(value.tolist(), digits)
    return value


def _trace_path(outdir, chain):
    return os.path.join(outdir, f"trace_chain{chain}.csv")


def _w_path(outdir, chain):
    return os.path.join(outdir, f"subgroups_chain{chain}.csv")


def save_traces(traces, outdir):
    """Write one trace CSV and one subgroup CSV per chain."""
    os.makedirs(outdir, exist_ok=True)
    for c, trace in enumerate(traces):
        v = trace.num_nodes
        header = "sweep,H,loglik,theta,theta0," + ",".join(f"z_{i + 1}" for i in range(v))
        with open(_trace_path(outdir, c), "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for s in range(len(trace)):
                row = [
                    str(int(trace.sweeps[s])),
                    str(int(trace.z[s].max()) + 1),
                    f"{trace.log_likelihood[s]:.12g}",
                    f"{trace.theta[s]:.12g}",
                    f"{trace.theta0[s]:.12g}",
                ]
                row.extend(str(int(x)) for x in trace.z[s])
                fh.write(",".join(row) + "\n")
        header_w = "sweep," + ",".join(f"w_{i + 1}" for i in range(v))
        with open(_w_path(outdir, c), "w", encoding="utf-8") as fh:
            fh.write(header_w + "\n")
            for s in range(len(trace)):
                row = [str(int(trace.sweeps[s]))]
                row.extend(str(int(x)) for x in trace.w[s])
                fh.write(",".join(row) + "\n")


def load_traces(tracedir) -> tuple:
    """Load and merge all chains in a trace directory; returns (trace, manifest)."""
    manifest = read_manifest(tracedir)
    layer_sizes = np.asarray(manifest["layer_sizes"], dtype=np.int64)
    layer_of = np.repeat(np.arange(layer_sizes.size), layer_sizes)
    traces = []
    chain = 0
    while os.path.exists(_trace_path(tracedir, chain)):
        data = np.loadtxt(_trace_path(tracedir, chain), delimiter=",", skiprows=1, ndmin=2)
        wdata = np.loadtxt(_w_path(tracedir, chain), delimiter=",", skiprows=1, ndmin=2)
        if data.shape[0] != wdata.shape[0]:
            raise ValueError(f"chain {chain}: trace and subgroup files disagree on length")
        traces.append(
            SampleTrace(
                sweeps=data[:, 0].astype(np.int64),
                z=data[:, 5:].astype(np.int16),
                w=wdata[:, 1:].astype(np.int16),
                log_likelihood=data[:, 2],
                theta=data[:, 3],
                theta0=data[:, 4],
                layer_of=layer_of,
                config=manifest.get("config", {}),
            )
        )
        chain += 1
    if not traces:
        raise FileNotFoundError(f"no trace CSVs found under {tracedir}")
    return SampleTrace.merge(traces), manifest


def write_manifest(outdir, payload: dict):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(round_sig(payload), fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_manifest(outdir) -> dict:
    with open(os.path.join(outdir, "manifest.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)
