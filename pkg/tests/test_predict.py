import math
from collections import Counter

import numpy as np
import pytest

from layersbm.franchise import FranchiseState, coclustering_probability, joint_conditional, marginal_urn
from layersbm.network import SupraNetwork
from layersbm.predict import (
    edge_probabilities,
    joint_config_logprob,
    predictive_coclustering,
    resolve_layers,
    sample_augmented_partitions,
    sample_new_allocations,
)
from layersbm.priors import PriorSpec
from layersbm.sampler import SampleTrace

HDP11 = PriorSpec.hdp(1.0, 1.0)


def toy_trace(z_rows, w_rows, layer_of, theta=1.0, theta0=1.0):
    z = np.asarray(z_rows, dtype=np.int16)
    s = z.shape[0]
    return SampleTrace(
        sweeps=np.arange(s),
        z=z,
        w=np.asarray(w_rows, dtype=np.int16),
        log_likelihood=np.zeros(s),
        theta=np.full(s, theta),
        theta0=np.full(s, theta0),
        layer_of=np.asarray(layer_of),
    )


def toy_net(layer_sizes, edges=()):
    sizes = np.asarray(layer_sizes)
    v = int(sizes.sum())
    adj = np.zeros((v, v), dtype=bool)
    for a, b in edges:
        adj[a, b] = adj[b, a] = True
    layer_of = np.repeat(np.arange(sizes.size), sizes)
    return SupraNetwork(adj, layer_of, sizes)


def test_resolve_layers_errors():
    net = toy_net([2, 1])
    assert list(resolve_layers(net, ["0", "1", 0])) == [0, 1, 0]
    with pytest.raises(KeyError):
        resolve_layers(net, ["nope"])


def test_sample_new_allocations_matches_urn():
    # empirical law of one new node's profile against the closed form
    net = toy_net([3, 2])
    z = [0, 0, 1, 1, 2]
    w = [0, 0, 1, 0, 1]
    state0 = FranchiseState.from_assignments(net.layer_of, z, w)
    urn = marginal_urn(state0, 0, HDP11)
    rng = np.random.default_rng(0)
    draws = 40_000
    counts = Counter()
    ext_layer = np.concatenate([net.layer_of, [0]])
    for _ in range(draws):
        st = FranchiseState.from_assignments(ext_layer, z + [-1], w + [-1])
        h = sample_new_allocations(st, [5], HDP11, rng)[0]
        counts[int(h)] += 1
    for h, p in enumerate(urn):
        freq = counts.get(h, 0) / draws
        se = math.sqrt(p * (1 - p) / draws)
        assert abs(freq - p) < 4 * se + 1e-9


def test_two_new_nodes_cocluster_rate_matches_closed_form():
    net = toy_net([2, 2], edges=[(0, 1)])
    z = [0, 0, 1, 0]
    w = [0, 0, 0, 1]
    state0 = FranchiseState.from_assignments(net.layer_of, z, w)
    target = coclustering_probability(state0, 0, 1, HDP11)
    rng = np.random.default_rng(1)
    draws = 40_000
    hits = 0
    ext_layer = np.concatenate([net.layer_of, [0, 1]])
    for _ in range(draws):
        st = FranchiseState.from_assignments(ext_layer, z + [-1, -1], w + [-1, -1])
        h = sample_new_allocations(st, [4, 5], HDP11, rng)
        hits += int(h[0] == h[1])
    se = math.sqrt(target * (1 - target) / draws)
    assert abs(hits / draws - target) < 4 * se


def test_predictive_coclustering_single_sample_equals_urn():
    # one in-sample node per layer, trivial trace: entries are pure urn values
    net = toy_net([1, 1])
    trace = toy_trace([[0, 1]], [[0, 0]], net.layer_of)
    aug = predictive_coclustering(trace, net, ["0", "1"], HDP11)
    assert aug.shape == (4, 4)
    state = FranchiseState.from_assignments(net.layer_of, [0, 1], [0, 0])
    urn0 = marginal_urn(state, 0, HDP11)
    assert aug[2, 0] == pytest.approx(urn0[0], abs=1e-12)
    assert aug[2, 1] == pytest.approx(urn0[1], abs=1e-12)
    # new-new pair across layers
    assert aug[2, 3] == pytest.approx(coclustering_probability(state, 0, 1, HDP11), abs=1e-12)
    assert np.array_equal(aug, aug.T)
    assert np.all(np.diag(aug) == 1.0)
    assert np.all((aug >= 0) & (aug <= 1))


def test_predictive_coclustering_prior_values_on_empty_insample():
    # a single isolated in-sample node in layer 0; two new same-layer nodes in
    # layer 1 have the no-data co-clustering value 3/4
    net = toy_net([1, 1])
    trace = toy_trace([[0, 1]], [[0, 0]], net.layer_of)
    aug = predictive_coclustering(trace, net, ["1", "1"], HDP11)
    state = FranchiseState.from_assignments(net.layer_of, [0, 1], [0, 0])
    expect = coclustering_probability(state, 1, 1, HDP11)
    assert aug[2, 3] == pytest.approx(expect, abs=1e-12)


def test_same_layer_permutation_leaves_coclustering_invariant():
    net = toy_net([3, 2], edges=[(0, 1), (2, 3)])
    trace = toy_trace([[0, 0, 1, 1, 0]], [[0, 0, 1, 0, 1]], net.layer_of)
    a = predictive_coclustering(trace, net, ["0", "0", "1"], HDP11)
    b = predictive_coclustering(trace, net, ["0", "0", "1"], HDP11)
    assert np.array_equal(a, b)
    # swapping the two same-layer new nodes permutes rows/cols consistently
    perm = [0, 1, 2, 3, 4, 6, 5, 7]
    assert np.allclose(a, a[np.ix_(perm, perm)])


def test_edge_probabilities_fresh_group_is_prior_mean():
    # single in-sample node: no dyads at all, every block is fresh
    net = toy_net([1])
    trace = toy_trace([[0]], [[0]], net.layer_of)
    rng = np.random.default_rng(2)
    probs = edge_probabilities(trace, net, ["0", "0"], HDP11, rng)
    assert probs.shape == (2, 3)
    assert probs[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert probs[0, 2] == pytest.approx(0.5, abs=1e-12)
    assert probs[1, 0] == pytest.approx(0.5, abs=1e-12)
    # own column is a structural zero
    assert probs[0, 1] == 0.0 and probs[1, 2] == 0.0


def test_edge_probabilities_in_range_and_average():
    rng = np.random.default_rng(3)
    net = toy_net([3, 2], edges=[(0, 1), (1, 2), (3, 4)])
    trace = toy_trace([[0, 0, 1, 1, 1], [0, 0, 0, 1, 1]], [[0, 0, 1, 0, 0], [0, 0, 0, 0, 0]], net.layer_of)
    probs = edge_probabilities(trace, net, ["0"], HDP11, rng, inner_draws=4)
    assert probs.shape == (1, 6)
    valid = np.delete(probs[0], 5)
    assert np.all((valid >= 0) & (valid <= 1))


def test_joint_config_single_dyad_outcomes_sum_to_one():
    net = toy_net([1])
    trace = toy_trace([[0]], [[0]], net.layer_of)
    rng = np.random.default_rng(4)
    p1 = math.exp(joint_config_logprob(trace, net, ["0"], [[1.0, np.nan]], HDP11, rng))
    p0 = math.exp(joint_config_logprob(trace, net, ["0"], [[0.0, np.nan]], HDP11, rng))
    assert p1 == pytest.approx(0.5, abs=1e-12)
    assert p0 + p1 == pytest.approx(1.0, abs=1e-12)


def test_joint_config_matches_exact_enumeration():
    # k = 1 on a 4-node network: enumerate the joint urn exactly per sample
    net = toy_net([2, 2], edges=[(0, 1), (1, 2)])
    z_row = [0, 0, 1, 1]
    w_row = [0, 0, 0, 0]
    config = np.array([[1.0, 0.0, 1.0, 0.0, np.nan]])
    prior = HDP11
    state = FranchiseState.from_assignments(np.append(net.layer_of, 0), z_row + [-1], w_row + [-1])
    table = joint_conditional(state, 0, prior)
    from layersbm.likelihood import induced_counts
    from scipy.special import betaln

    counts = induced_counts(net, z_row)
    exact = 0.0
    for h in range(table.shape[0]):
        p_h = table[h].sum()
        if p_h <= 0:
            continue
        # score the configured dyads against profile h
        log_p = 0.0
        m_new = {}
        for u, y in enumerate(config[0][:4]):
            lo, hi = sorted((h, z_row[u]))
            m, t = m_new.get((lo, hi), (0, 0))
            m_new[(lo, hi)] = (m + int(y), t + 1)
        for (lo, hi), (m, t) in m_new.items():
            if hi < counts.num_groups:
                a_y = 1 + counts.m[lo, hi]
                b_y = 1 + counts.mbar[lo, hi]
            else:
                a_y = b_y = 1.0
            log_p += betaln(a_y + m, b_y + t - m) - betaln(a_y, b_y)
        exact += p_h * math.exp(log_p)

    # Monte Carlo with many replicated samples of the same state
    reps = 4000
    trace = toy_trace([z_row] * reps, [w_row] * reps, net.layer_of)
    rng = np.random.default_rng(5)
    mc = math.exp(joint_config_logprob(trace, net, ["0"], config, prior, rng))
    assert mc == pytest.approx(exact, rel=0.05)


def test_joint_config_validation():
    net = toy_net([1])
    trace = toy_trace([[0]], [[0]], net.layer_of)
    rng = np.random.default_rng(6)
    with pytest.raises(ValueError, match="every dyad"):
        joint_config_logprob(trace, net, ["0"], [[np.nan, np.nan]], HDP11, rng)
    with pytest.raises(ValueError, match="0 or 1"):
        joint_config_logprob(trace, net, ["0"], [[0.5, np.nan]], HDP11, rng)
    with pytest.raises(ValueError, match="symmetric"):
        joint_config_logprob(
            trace, net, ["0", "0"],
            np.array([[1.0, np.nan, 1.0], [0.0, 0.0, np.nan]]), HDP11, rng,
        )


def test_sample_augmented_partitions_shape():
    net = toy_net([2, 1], edges=[(0, 1)])
    trace = toy_trace([[0, 0, 1], [0, 1, 1]], [[0, 0, 0], [0, 1, 0]], net.layer_of)
    rng = np.random.default_rng(7)
    draws = sample_augmented_partitions(trace, net, ["0", "1"], HDP11, rng)
    assert draws.shape == (2, 5)
    assert np.array_equal(draws[:, :3], trace.z)
    assert draws.max() <= 1 + 2  # at most two fresh profiles on top
