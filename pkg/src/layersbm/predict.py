"""Prediction for unseen nodes given only their layer labels.

Nothing about a new node is observed except its layer, yet the partition
prior is projective, so its allocation law given a retained sample is exactly
the sequential urn, and edge predictions follow from beta-binomial
conjugacy on the in-sample block counts.  Averaging over the trace yields

* an augmented co-clustering matrix (new-old entries from the one-node urn,
  new-new entries from the two-node law, in-sample block unchanged),
* sequential joint draws of new allocations, one per retained sample,
* the predictive probability of a full new-edge configuration,
* per-dyad edge probabilities.

With gamma hyperpriors on the Dirichlet concentrations, every sample is
evaluated at its own sampled concentration pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, logsumexp

from .franchise import FranchiseState, coclustering_probability, joint_conditional, marginal_urn
from .likelihood import induced_counts
from .posterior import similarity
from .priors import PriorSpec

__all__ = [
    "PredictionRequest",
    "resolve_layers",
    "sample_new_allocations",
    "sample_augmented_partitions",
    "predictive_coclustering",
    "edge_probabilities",
    "joint_config_logprob",
]


@dataclass
class PredictionRequest:
    """What to predict for the incoming nodes.

    ``new_layers`` holds one layer label (or index) per new node, in the
    order the nodes arrive.  ``config`` optionally carries a full new-edge
    configuration whose joint probability is wanted.
    """

    new_layers: list
    seed: int = 0
    config: np.ndarray | None = None


def resolve_layers(net, new_layers) -> np.ndarray:
    """Map layer labels (or integer indices) to layer indices."""
    out = []
    for lab in new_layers:
        if lab in net.layer_labels:
            out.append(net.layer_labels.index(lab))
        else:
            try:
                idx = int(lab)
            except (TypeError, ValueError):
                idx = -1
            if not 0 <= idx < net.num_layers:
                raise KeyError(f"unknown layer label {lab!r}")
            out.append(idx)
    return np.array(out, dtype=np.int64)


def _sample_prior(trace, prior: PriorSpec, s: int) -> PriorSpec:
    if prior.family == "dp":
        return PriorSpec.hdp(float(trace.theta[s]), float(trace.theta0[s]))
    return prior


def _extended_state(layer_of_ext, z_row, w_row, k: int) -> FranchiseState:
    pad = np.full(k, -1, dtype=np.int64)
    return FranchiseState.from_assignments(
        layer_of_ext, np.concatenate([z_row, pad]), np.concatenate([w_row, pad])
    )


def sample_new_allocations(state: FranchiseState, new_nodes, prior: PriorSpec, rng):
    """Draw (profile, subgroup) for each unallocated node in ``new_nodes``,
    sequentially from the joint urn; mutates ``state`` and returns the new
    profile labels."""
    z_new = np.empty(len(new_nodes), dtype=np.int64)
    for i, v in enumerate(new_nodes):
        j = int(state.layer_of[v])
        table = joint_conditional(state, j, prior)
        flat = table.ravel()
        idx = int(np.searchsorted(np.cumsum(flat), rng.random() * flat.sum(), side="right"))
        idx = min(idx, flat.size - 1)
        h, tau = divmod(idx, table.shape[1])
        state.insert_node(int(v), h, tau)
        z_new[i] = h
    return z_new


def sample_augmented_partitions(trace, net, new_layers, prior: PriorSpec, rng) -> np.ndarray:
    """One joint draw of the extended partition per retained sample.

    Returns an (S, V+k) array whose rows extend each sampled allocation with
    sequentially drawn allocations for the new nodes; these are the candidate
    partitions for point-estimating the new nodes' groups.
    """
    layers = resolve_layers(net, new_layers)
    k = layers.size
    v = net.num_nodes
    ext_layer_of = np.concatenate([net.layer_of, layers])
    out = np.empty((len(trace), v + k), dtype=np.int64)
    for s in range(len(trace)):
        sp = _sample_prior(trace, prior, s)
        state = _extended_state(ext_layer_of, trace.z[s], trace.w[s], k)
        z_new = sample_new_allocations(state, v + np.arange(k), sp, rng)
        out[s, :v] = trace.z[s]
        out[s, v:] = z_new
    return out


def predictive_coclustering(trace, net, new_layers, prior: PriorSpec) -> np.ndarray:
    """Augmented (V+k) x (V+k) co-clustering matrix.

    New-old entries average the one-node urn evaluated at the old node's
    sampled profile; new-new entries average the exact two-node law on the
    reduced state; the in-sample block is the usual similarity matrix.
    """
    layers = resolve_layers(net, new_layers)
    k = layers.size
    v = net.num_nodes
    ext_layer_of = np.concatenate([net.layer_of, layers])
    aug = np.zeros((v + k, v + k))
    aug[:v, :v] = similarity(trace)
    s_total = len(trace)
    distinct = sorted(set(layers.tolist()))
    pairs = sorted({tuple(sorted((layers[i], layers[i2]))) for i in range(k) for i2 in range(i + 1, k)})
    for s in range(s_total):
        sp = _sample_prior(trace, prior, s)
        state = _extended_state(ext_layer_of, trace.z[s], trace.w[s], k)
        urns = {j: marginal_urn(state, j, sp) for j in distinct}
        for i in range(k):
            aug[v + i, :v] += urns[int(layers[i])][trace.z[s]]
        cocl = {
            pair: coclustering_probability(state, pair[0], pair[1], sp) for pair in pairs
        }
        for i in range(k):
            for i2 in range(i + 1, k):
                aug[v + i, v + i2] += cocl[tuple(sorted((layers[i], layers[i2])))]
    aug[v:, :] /= s_total
    aug[:v, v:] = aug[v:, :v].T
    lower = np.tril_indices(k, -1)
    aug[v:, v:][lower] = aug[v:, v:].T[lower]
    np.fill_diagonal(aug, 1.0)
    return aug


def _block_lookup(counts, z_pair_a, z_pair_b, a, b):
    """Posterior-mean edge probability for (possibly fresh) profile pairs."""
    big_h = counts.num_groups
    fresh = (z_pair_a >= big_h) | (z_pair_b >= big_h)
    lo = np.where(fresh, 0, np.minimum(z_pair_a, z_pair_b))
    hi = np.where(fresh, 0, np.maximum(z_pair_a, z_pair_b))
    m = counts.m[lo, hi]
    mbar = counts.mbar[lo, hi]
    p = (a + m) / (a + b + m + mbar)
    return np.where(fresh, a / (a + b), p)


def edge_probabilities(
    trace, net, new_layers, prior: PriorSpec, rng, a: float = 1.0, b: float = 1.0, inner_draws: int = 1
) -> np.ndarray:
    """k x (V+k) matrix of predictive edge probabilities for the new nodes.

    Per retained sample the new allocations are resampled (``inner_draws``
    times for variance reduction) and each dyad contributes the posterior
    mean of its block probability under the in-sample counts; blocks touched
    by a fresh profile fall back to the prior mean a / (a + b).  Entries at a
    node's own column are structural zeros.
    """
    layers = resolve_layers(net, new_layers)
    k = layers.size
    v = net.num_nodes
    ext_layer_of = np.concatenate([net.layer_of, layers])
    out = np.zeros((k, v + k))
    s_total = len(trace)
    old_idx = np.arange(v)
    for s in range(s_total):
        sp = _sample_prior(trace, prior, s)
        counts = induced_counts(net, trace.z[s], a, b)
        for _ in range(inner_draws):
            state = _extended_state(ext_layer_of, trace.z[s], trace.w[s], k)
            z_new = sample_new_allocations(state, v + np.arange(k), sp, rng)
            for i in range(k):
                out[i, :v] += _block_lookup(
                    counts, np.full(v, z_new[i]), trace.z[s][old_idx], a, b
                )
                for i2 in range(k):
                    if i2 != i:
                        out[i, v + i2] += _block_lookup(
                            counts, np.array([z_new[i]]), np.array([z_new[i2]]), a, b
                        )[0]
    out /= s_total * inner_draws
    return out


def _validate_config(config, k, v):
    cfg = np.asarray(config, dtype=float)
    if cfg.shape != (k, v + k):
        raise ValueError(f"configuration must be {k} x {v + k}")
    for i in range(k):
        if np.isnan(cfg[i, : v + i]).any() or np.isnan(cfg[i, v + i + 1 :]).any():
            raise ValueError("configuration must specify every dyad touching a new node")
        for i2 in range(k):
            if i2 != i and cfg[i, v + i2] != cfg[i2, v + i]:
                raise ValueError("new-new dyads must be symmetric")
    vals = cfg[~np.isnan(cfg)]
    if np.any((vals != 0) & (vals != 1)):
        raise ValueError("edges must be 0 or 1")
    return cfg


def joint_config_logprob(
    trace, net, new_layers, config, prior: PriorSpec, rng, a: float = 1.0, b: float = 1.0
) -> float:
    """Log predictive probability of a full new-edge configuration.

    ``config`` is a k x (V+k) 0/1 matrix covering every dyad that touches a
    new node (own-column entries ignored).  Per sample, the new allocations
    are drawn sequentially and the configuration is scored in closed form:
    blocks between existing profiles update their in-sample beta posteriors,
    blocks touching fresh profiles start from the prior.  The Monte Carlo
    average is returned in log space.
    """
    layers = resolve_layers(net, new_layers)
    k = layers.size
    v = net.num_nodes
    cfg = _validate_config(config, k, v)
    ext_layer_of = np.concatenate([net.layer_of, layers])
    log_terms = []
    for s in range(len(trace)):
        sp = _sample_prior(trace, prior, s)
        counts = induced_counts(net, trace.z[s], a, b)
        big_h = counts.num_groups
        state = _extended_state(ext_layer_of, trace.z[s], trace.w[s], k)
        z_new = sample_new_allocations(state, v + np.arange(k), sp, rng)
        zbar = np.concatenate([trace.z[s], z_new])
        h_ext = int(zbar.max()) + 1
        m_new = np.zeros((h_ext, h_ext), dtype=np.int64)
        t_new = np.zeros((h_ext, h_ext), dtype=np.int64)
        for i in range(k):
            for u in range(v + i):
                y = cfg[i, u] if u < v else cfg[i, u]
                lo, hi = sorted((int(zbar[v + i]), int(zbar[u])))
                m_new[lo, hi] += int(y)
                t_new[lo, hi] += 1
        log_p = 0.0
        for lo, hi in zip(*np.nonzero(t_new)):
            mn = int(m_new[lo, hi])
            tn = int(t_new[lo, hi])
            if hi < big_h:
                a_y = a + counts.m[lo, hi]
                b_y = b + counts.mbar[lo, hi]
            else:
                a_y, b_y = a, b
            log_p += betaln(a_y + mn, b_y + tn - mn) - betaln(a_y, b_y)
        log_terms.append(log_p)
    return float(logsumexp(log_terms) - np.log(len(log_terms)))
