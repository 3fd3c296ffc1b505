import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

import layersbm.sampler as sampler_mod
from layersbm.checks import _canonical_key, direct_partition_masses
from layersbm.engine import HAVE_NUMBA
from layersbm.franchise import FranchiseState
from layersbm.network import SupraNetwork
from layersbm.priors import GammaHyperprior, PriorSpec
from layersbm.sampler import SamplerConfig, SampleTrace, chain_seed, hyperprior_step, run_chain, run_chains


def make_net(rng, sizes, density=0.3):
    v = int(sum(sizes))
    adj = rng.random((v, v)) < density
    adj = np.triu(adj, 1)
    adj = adj | adj.T
    layer_of = np.repeat(np.arange(len(sizes)), sizes)
    return SupraNetwork(adj, layer_of, sizes)


def test_config_validation():
    prior = PriorSpec.hdp(1, 1)
    with pytest.raises(ValueError):
        SamplerConfig(prior=prior, n_iter=10, n_burn=10)
    with pytest.raises(ValueError):
        SamplerConfig(prior=prior, thin=0)
    with pytest.raises(ValueError):
        SamplerConfig(prior=prior, a=-1.0)


def test_single_node_network():
    net = SupraNetwork(np.zeros((1, 1), dtype=bool), [0], [1])
    trace = run_chain(net, SamplerConfig(prior=PriorSpec.hdp(1, 1), n_iter=40, n_burn=5, seed=0))
    assert np.all(trace.z == 0)
    assert np.all(trace.w == 0)
    assert len(trace) == 35


def test_determinism_and_trace_shape():
    rng = np.random.default_rng(0)
    net = make_net(rng, [5, 4])
    cfg = SamplerConfig(prior=PriorSpec.hnsp(0.3, 0.6), n_iter=120, n_burn=20, thin=4, seed=7)
    t1 = run_chain(net, cfg)
    t2 = run_chain(net, cfg)
    assert np.array_equal(t1.z, t2.z)
    assert np.array_equal(t1.w, t2.w)
    assert np.array_equal(t1.log_likelihood, t2.log_likelihood)
    assert len(t1) == (120 - 20) // 4
    assert t1.z.shape == (len(t1), 9)


def test_stored_samples_satisfy_state_invariants():
    rng = np.random.default_rng(1)
    net = make_net(rng, [4, 3, 2])
    trace = run_chain(net, SamplerConfig(prior=PriorSpec.hdp(0.8, 1.2), n_iter=60, n_burn=10, seed=3))
    for s in range(len(trace)):
        st = FranchiseState.from_assignments(net.layer_of, trace.z[s], trace.w[s])
        st.check_consistency(canonical=True)


def test_dense_and_sparse_tables_share_draws():
    rng = np.random.default_rng(2)
    net = make_net(rng, [4, 4])
    for prior in [PriorSpec.hdp(1.0, 2.0), PriorSpec.hnsp(0.4, 0.5)]:
        cfg = SamplerConfig(prior=prior, n_iter=200, n_burn=0, seed=11)
        dense = run_chain(net, replace(cfg, dense_tables=True))
        sparse_ref = None
        had = sampler_mod.HAVE_NUMBA
        try:
            sampler_mod.HAVE_NUMBA = False
            sparse_ref = run_chain(net, cfg)
        finally:
            sampler_mod.HAVE_NUMBA = had
        assert np.array_equal(dense.z, sparse_ref.z)
        assert np.array_equal(dense.w, sparse_ref.w)


@pytest.mark.skipif(not HAVE_NUMBA, reason="compiled engine unavailable")
def test_engine_matches_reference_path():
    rng = np.random.default_rng(3)
    net = make_net(rng, [6, 5, 4])
    for prior in [PriorSpec.hdp(0.7, 1.5), PriorSpec.hnsp(0.3, 0.6), PriorSpec.hdp_hyper(5, 10, 12, 3)]:
        cfg = SamplerConfig(prior=prior, n_iter=150, n_burn=30, seed=9, random_scan=True)
        engine_trace = run_chain(net, cfg)
        had = sampler_mod.HAVE_NUMBA
        try:
            sampler_mod.HAVE_NUMBA = False
            ref_trace = run_chain(net, cfg)
        finally:
            sampler_mod.HAVE_NUMBA = had
        assert np.array_equal(engine_trace.z, ref_trace.z)
        assert np.array_equal(engine_trace.w, ref_trace.w)
        assert np.allclose(engine_trace.log_likelihood, ref_trace.log_likelihood)
        assert np.allclose(engine_trace.theta, ref_trace.theta)


def test_debug_checks_pass():
    rng = np.random.default_rng(4)
    net = make_net(rng, [4, 3])
    run_chain(net, SamplerConfig(prior=PriorSpec.hdp(1, 1), n_iter=15, n_burn=2, seed=5, debug_checks=True))
    run_chain(net, SamplerConfig(prior=PriorSpec.hnsp(0.4, 0.4), n_iter=15, n_burn=2, seed=5, debug_checks=True))


def test_generic_prior_runs_via_dense_tables():
    from layersbm.checks import generic_twin

    rng = np.random.default_rng(5)
    net = make_net(rng, [3, 3])
    prior = PriorSpec.hdp(1.0, 1.0)
    cfg = SamplerConfig(prior=generic_twin(prior), n_iter=120, n_burn=20, seed=13)
    generic_trace = run_chain(net, cfg)
    closed = run_chain(net, replace(cfg, prior=prior, dense_tables=True))
    assert np.array_equal(generic_trace.z, closed.z)


def test_initialization_modes():
    rng = np.random.default_rng(6)
    net = make_net(rng, [4, 4])
    one = run_chain(net, SamplerConfig(prior=PriorSpec.hdp(1, 1), n_iter=5, n_burn=0, seed=1, init="one-block"))
    assert one.z.shape[0] == 5
    z0 = np.zeros(8, dtype=int)
    w0 = np.zeros(8, dtype=int)
    warm = run_chain(
        net, SamplerConfig(prior=PriorSpec.hdp(1, 1), n_iter=5, n_burn=0, seed=1, init=(z0, w0))
    )
    assert warm.z.shape[0] == 5
    with pytest.raises(ValueError):
        run_chain(net, SamplerConfig(prior=PriorSpec.hdp(1, 1), n_iter=5, n_burn=0, init="bogus"))


def test_prior_only_chain_reproduces_partition_law():
    # short-chain version of the exactness check; the acceptance suite runs
    # the long one
    layer_of = np.array([0, 0, 1, 1])
    net = SupraNetwork(np.zeros((4, 4), dtype=bool), layer_of, [2, 2])
    prior = PriorSpec.hdp(1.0, 1.0)
    cfg = SamplerConfig(prior=prior, n_iter=20_000, n_burn=200, seed=21, prior_only=True)
    trace = run_chain(net, cfg)
    exact = direct_partition_masses([2, 2], prior)
    counts = exact.pop("_count")
    emp = Counter(_canonical_key(layer_of, trace.z[s]) for s in range(len(trace)))
    s_total = len(trace)
    for key, mass in exact.items():
        prob = mass * counts[key]
        se = math.sqrt(prob * (1 - prob) / s_total)
        assert abs(emp.get(key, 0) / s_total - prob) < 4 * se + 1e-12


def exact_posterior_coclustering(net, prior, pair, a=1.0, b=1.0):
    """Enumeration oracle: P(z_v = z_u | Y) over all partitions."""
    from layersbm.eppf import set_partitions
    from layersbm.franchise import peppf_log_mass
    from layersbm.likelihood import induced_counts

    num = den = 0.0
    v = net.num_nodes
    for blocks in set_partitions(range(v)):
        z = np.empty(v, dtype=np.int64)
        for label, block in enumerate(blocks):
            for u in block:
                z[u] = label
        key = _canonical_key(net.layer_of, z)
        weight = math.exp(peppf_log_mass(np.asarray(key), prior)) * math.exp(
            induced_counts(net, z, a, b).log_marginal_likelihood()
        )
        den += weight
        if z[pair[0]] == z[pair[1]]:
            num += weight
    return num / den


def test_posterior_coclustering_matches_enumeration_oracle():
    prior = PriorSpec.hdp(1.0, 1.0)

    # single dyad: its collapsed likelihood is the same under every
    # allocation, so the posterior equals the prior 3/4 exactly
    net2 = SupraNetwork(np.zeros((2, 2), dtype=bool), [0, 0], [2])
    exact2 = exact_posterior_coclustering(net2, prior, (0, 1))
    assert exact2 == pytest.approx(0.75, abs=1e-12)

    # a repulsive triangle: 0 and 1 are unconnected but share neighbor 2
    adj = np.zeros((3, 3), dtype=bool)
    adj[0, 2] = adj[2, 0] = adj[1, 2] = adj[2, 1] = True
    net3 = SupraNetwork(adj, [0, 0, 0], [3])
    exact3 = exact_posterior_coclustering(net3, prior, (0, 1))

    for net, pair, exact in [(net2, (0, 1), exact2), (net3, (0, 1), exact3)]:
        cfg = SamplerConfig(prior=prior, n_iter=100_000, n_burn=1_000, seed=31)
        trace = run_chain(net, cfg)
        freq = float(np.mean(trace.z[:, pair[0]] == trace.z[:, pair[1]]))
        assert freq == pytest.approx(exact, abs=0.02)


def test_hyperprior_step_shapes_and_errors():
    st = FranchiseState.from_assignments([0], [0], [0])
    hyper = GammaHyperprior(2.0, 3.0, 4.0, 5.0)
    rng = np.random.default_rng(0)
    theta, theta0 = hyperprior_step(st, 1.0, 1.0, hyper, rng)
    assert theta > 0 and theta0 > 0
    with pytest.raises(ValueError):
        run_chain(
            SupraNetwork(np.zeros((1, 1), dtype=bool), [0], [1]),
            SamplerConfig(prior=PriorSpec(PriorSpec.hnsp(0.5, 0.5).level1,
                                          PriorSpec.hnsp(0.5, 0.5).level0,
                                          GammaHyperprior(1, 1, 1, 1)),
                          n_iter=5, n_burn=0),
        )


def test_hyperprior_long_run_moments_match_quadrature():
    # fixed counts: theta's stationary law is gamma(alpha, beta) tilted by
    # prod_j theta^(ell_j) / [theta]_(V_j); compare the chain mean against
    # numerical integration (Rao-Blackwellized over the gamma step)
    layer_of = np.repeat([0, 1, 2], [6, 5, 4])
    z = np.array([0, 0, 0, 1, 1, 2, 0, 0, 1, 1, 3, 2, 2, 3, 3])
    w = np.array([0, 0, 0, 1, 1, 2, 0, 0, 1, 1, 2, 0, 0, 1, 1])
    st = FranchiseState.from_assignments(layer_of, z, w)
    alpha, beta = 3.0, 2.0
    ell_rows = [st.ell_row(j) for j in range(st.d)]
    v_js = st.layer_count.astype(float)

    def tilt(theta):
        from scipy.special import gammaln

        log_p = (alpha - 1) * math.log(theta) - beta * theta
        for lj, vj in zip(ell_rows, v_js):
            log_p += lj * math.log(theta) + gammaln(theta) - gammaln(theta + vj)
        return math.exp(log_p)

    norm, _ = quad(tilt, 0, 60)
    target, _ = quad(lambda t: t * tilt(t), 0, 60)
    analytic_mean = target / norm

    rng = np.random.default_rng(77)
    hyper = GammaHyperprior(alpha, beta, 10.0, 10.0)
    theta = 1.0
    total = 0.0
    draws = 200_000
    ell_total = st.ell_total
    for _ in range(draws):
        etas = rng.beta(theta, v_js)
        nu = float(np.log(etas).sum())
        # Rao-Blackwellized mean of the gamma full conditional
        total += (alpha + ell_total) / (beta - nu)
        theta = rng.gamma(alpha + ell_total, 1.0 / (beta - nu))
    assert total / draws == pytest.approx(analytic_mean, rel=0.02)


def test_chain_seed_derivation_and_merge():
    assert chain_seed(5, 0) != chain_seed(5, 1)
    assert chain_seed(5, 0) == chain_seed(5, 0)
    rng = np.random.default_rng(8)
    net = make_net(rng, [3, 3])
    cfg = SamplerConfig(prior=PriorSpec.hdp(1, 1), n_iter=30, n_burn=5, seed=5)
    traces = run_chains(net, cfg, 2)
    assert not np.array_equal(traces[0].z, traces[1].z)
    merged = SampleTrace.merge(traces)
    assert len(merged) == len(traces[0]) + len(traces[1])
    assert merged.num_groups.shape == (len(merged),)
