import math
from collections import Counter

import numpy as np
import pytest

from layersbm.checks import _canonical_key, direct_partition_masses
from layersbm.priors import PriorSpec
from layersbm.simulate import (
    DEFAULT_LAYER_SIZES,
    ScenarioSpec,
    generate_scenario,
    sample_prior_partition,
    scenario_spec,
)


def test_default_specs():
    for scenario in (1, 2):
        spec = scenario_spec(scenario, seed=3)
        assert spec.layer_sizes == DEFAULT_LAYER_SIZES
        assert spec.num_groups == 8
        assert spec.psi.shape == (8, 8)
        assert np.array_equal(spec.psi, spec.psi.T)
    # scenario 2 compresses toward the middle
    s1 = scenario_spec(1).psi
    s2 = scenario_spec(2).psi
    assert s2.max() < s1.max() and s2.min() > s1.min()
    with pytest.raises(ValueError):
        scenario_spec(3)


def test_degenerate_probability_matrices():
    z0 = np.array([0, 0, 1, 1])
    empty = ScenarioSpec((2, 2), z0, np.zeros((2, 2)), seed=0)
    net, _ = generate_scenario(empty)
    assert net.num_edges == 0
    full = ScenarioSpec((2, 2), z0, np.ones((2, 2)), seed=0)
    net, _ = generate_scenario(full)
    assert net.num_edges == 4 * 3 // 2


def test_spec_validation():
    z0 = np.array([0, 0, 1, 1])
    with pytest.raises(ValueError, match="allocate every node"):
        ScenarioSpec((2, 2), [0, 0, 1], np.eye(2) * 0.5, seed=0)
    with pytest.raises(ValueError, match="symmetric"):
        ScenarioSpec((2, 2), z0, np.array([[0.5, 0.1], [0.2, 0.5]]), seed=0)
    with pytest.raises(ValueError, match="must be 2x2"):
        ScenarioSpec((2, 2), z0, np.full((3, 3), 0.5), seed=0)


def test_generation_reproducible_and_moments():
    spec = scenario_spec(1, seed=11)
    net1, z1 = generate_scenario(spec)
    net2, z2 = generate_scenario(spec)
    assert np.array_equal(net1.adjacency, net2.adjacency)
    assert np.array_equal(z1, z2)
    # within-block empirical densities within 3 binomial standard errors
    for g in range(spec.num_groups):
        members = np.flatnonzero(z1 == g)
        if members.size < 2:
            continue
        block = net1.adjacency[np.ix_(members, members)]
        dyads = members.size * (members.size - 1) / 2
        emp = np.triu(block, 1).sum() / dyads
        p = spec.psi[g, g]
        se = math.sqrt(p * (1 - p) / dyads)
        assert abs(emp - p) < 3 * se + 1e-9


def test_prior_partition_single_node():
    rng = np.random.default_rng(0)
    z, w = sample_prior_partition([1], PriorSpec.hdp(1, 1), rng)
    assert list(z) == [0] and list(w) == [0]


def test_prior_partition_matches_partition_law():
    rng = np.random.default_rng(1)
    prior = PriorSpec.hdp(1.0, 1.0)
    layer_of = np.repeat([0, 1], [2, 2])
    draws = 20_000
    emp = Counter()
    for _ in range(draws):
        z, _ = sample_prior_partition([2, 2], prior, rng)
        emp[_canonical_key(layer_of, z)] += 1
    exact = direct_partition_masses([2, 2], prior)
    counts = exact.pop("_count")
    for key, mass in exact.items():
        prob = mass * counts[key]
        se = math.sqrt(prob * (1 - prob) / draws)
        assert abs(emp.get(key, 0) / draws - prob) < 4 * se + 1e-9


def test_prior_cluster_count_grows_with_concentrations():
    sizes = [8, 8]
    means = []
    for theta, theta0 in [(0.3, 0.3), (1.0, 1.0), (4.0, 4.0)]:
        rng = np.random.default_rng(5)
        hs = [
            sample_prior_partition(sizes, PriorSpec.hdp(theta, theta0), rng)[0].max() + 1
            for _ in range(400)
        ]
        means.append(np.mean(hs))
    assert means[0] < means[1] < means[2]
    means_nsp = []
    for sigma, sigma0 in [(0.15, 0.15), (0.5, 0.5), (0.85, 0.85)]:
        rng = np.random.default_rng(6)
        hs = [
            sample_prior_partition(sizes, PriorSpec.hnsp(sigma, sigma0), rng)[0].max() + 1
            for _ in range(400)
        ]
        means_nsp.append(np.mean(hs))
    assert means_nsp[0] < means_nsp[1] < means_nsp[2]


def test_default_prior_expected_cluster_count_near_five():
    rng = np.random.default_rng(7)
    hs = [
        sample_prior_partition(DEFAULT_LAYER_SIZES, PriorSpec.hdp(0.5, 4.0), rng)[0].max() + 1
        for _ in range(1500)
    ]
    assert 4.0 <= np.mean(hs) <= 6.0
