import itertools
import math

import numpy as np
import pytest

from layersbm.checks import (
    _canonical_key,
    coclustering_chain_rule,
    compare_partition_masses,
    generic_twin,
    random_prior,
    random_state,
)
from layersbm.eppf import set_partitions
from layersbm.franchise import (
    FranchiseState,
    coclustering_probability,
    elicitation_check,
    joint_conditional,
    marginal_urn,
    peppf_log_mass,
)
from layersbm.priors import PriorSpec

HDP11 = PriorSpec.hdp(1.0, 1.0)
HNSP55 = PriorSpec.hnsp(0.5, 0.5)


# -- state mechanics ---------------------------------------------------------


def test_empty_and_single_node_state():
    st = FranchiseState.empty([0, 0])
    assert st.num_profiles == 0 and st.ell_total == 0
    st.insert_node(0, 0, 0)
    assert st.num_profiles == 1 and st.layer_count[0] == 1
    st.detach_node(0)
    assert st.num_profiles == 0 and st.ell_total == 0


def test_incoherent_subgroup_profile_rejected():
    st = FranchiseState.empty([0, 0])
    st.insert_node(0, 0, 0)
    with pytest.raises(ValueError, match="carries profile"):
        st.insert_node(1, 1, 0)
    with pytest.raises(ValueError, match="not compact"):
        FranchiseState.from_assignments([0, 0], [0, 2], [0, 1])


def test_remove_shared_subgroup_keeps_shape():
    st = FranchiseState.from_assignments([0, 0], [0, 0], [0, 0])
    st.remove_node(1)
    assert st.sub_size[0] == [1]
    assert st.num_profiles == 1


def test_remove_then_undo_round_trip():
    rng = np.random.default_rng(12)
    for _ in range(30):
        st = random_state(rng, max_nodes=10)
        ref = st.copy()
        v = int(rng.choice(np.flatnonzero(st.z >= 0)))
        record = st.remove_node(v)
        st.check_consistency()
        st.undo_remove(record)
        assert np.array_equal(st.z, ref.z)
        assert np.array_equal(st.w, ref.w)
        assert np.array_equal(st.ell, ref.ell)
        assert np.array_equal(st.n, ref.n)
        assert st.sub_size == ref.sub_size
        assert st.sub_profile == ref.sub_profile


def test_remove_node_restores_appearance_order():
    # node 0 is the first carrier of its profile; removal must relabel
    st = FranchiseState.from_assignments([0, 0, 0, 0], [0, 1, 0, 1], [0, 1, 0, 1])
    st.remove_node(0)
    st.check_consistency(canonical=True)
    assert list(st.z[[1, 2, 3]]) == [0, 1, 0]


def test_state_json_round_trip():
    rng = np.random.default_rng(3)
    st = random_state(rng, max_nodes=12)
    back = FranchiseState.from_json(st.to_json())
    assert np.array_equal(back.z, st.z) and np.array_equal(back.w, st.w)
    assert np.array_equal(back.ell, st.ell)


# -- one-node laws -----------------------------------------------------------


def test_first_node_table_is_certain():
    st = FranchiseState.empty([0, 0])
    table = joint_conditional(st, 0, HDP11)
    assert table.shape == (1, 1)
    assert table[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_joint_table_hdp_one_prior_node():
    st = FranchiseState.from_assignments([0, 0], [0, -1], [0, -1])
    table = joint_conditional(st, 0, HDP11)
    assert table[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert table[0, 1] == pytest.approx(0.25, abs=1e-12)
    assert table[1, 1] == pytest.approx(0.25, abs=1e-12)
    assert table[1, 0] == 0.0


def test_joint_table_hnsp_one_prior_node():
    # existing-subgroup entry (q - sigma) / (V_j - 1); the rest follows by
    # normalization of the two new-subgroup entries
    st = FranchiseState.from_assignments([0, 0], [0, -1], [0, -1])
    table = joint_conditional(st, 0, HNSP55)
    assert table[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert table[0, 1] == pytest.approx(0.25, abs=1e-12)
    assert table[1, 1] == pytest.approx(0.25, abs=1e-12)
    assert table.sum() == pytest.approx(1.0, abs=1e-12)


def test_urn_hdp_frozen_values():
    st = FranchiseState.from_assignments([0, 0], [0, -1], [0, -1])
    urn = marginal_urn(st, 0, HDP11)
    assert urn[0] == pytest.approx(0.75, abs=1e-12)
    assert urn[1] == pytest.approx(0.25, abs=1e-12)
    cross = FranchiseState.from_assignments([0, 1], [0, -1], [0, -1])
    urn = marginal_urn(cross, 1, HDP11)
    assert urn[0] == pytest.approx(0.5, abs=1e-12)
    assert urn[1] == pytest.approx(0.5, abs=1e-12)
    empty = FranchiseState.empty([0])
    assert marginal_urn(empty, 0, HDP11)[0] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("family", ["dp", "nsp"])
def test_tables_normalize_marginalize_and_specialize(family):
    rng = np.random.default_rng(17)
    for _ in range(200):
        st = random_state(rng, max_nodes=20)
        prior = random_prior(rng, family)
        twin = generic_twin(prior)
        j = int(rng.integers(0, st.d))
        table = joint_conditional(st, j, prior)
        assert table.sum() == pytest.approx(1.0, abs=1e-10)
        urn = marginal_urn(st, j, prior)
        assert urn.sum() == pytest.approx(1.0, abs=1e-10)
        assert np.abs(table.sum(axis=1) - urn).max() < 1e-12
        assert np.abs(table - joint_conditional(st, j, twin)).max() < 1e-12
        assert np.abs(urn - marginal_urn(st, j, twin, method="general")).max() < 1e-12


def test_existing_subgroup_columns_have_single_nonzero():
    rng = np.random.default_rng(23)
    for _ in range(50):
        st = random_state(rng, max_nodes=15)
        prior = random_prior(rng, "dp" if rng.random() < 0.5 else "nsp")
        j = int(rng.integers(0, st.d))
        table = joint_conditional(st, j, prior)
        for tau in range(table.shape[1] - 1):
            assert (table[:, tau] > 0).sum() == 1


def test_predictive_sufficiency_under_node_permutation():
    rng = np.random.default_rng(29)
    for _ in range(100):
        st = random_state(rng, max_nodes=18)
        perm = np.arange(st.num_nodes)
        for j in range(st.d):
            members = np.flatnonzero(st.layer_of == j)
            perm[members] = rng.permutation(members)
        st2 = FranchiseState.from_assignments(st.layer_of, st.z[perm], st.w[perm])
        assert np.array_equal(st2.ell, st.ell)
        assert st2.sub_size == st.sub_size
        prior = random_prior(rng, "dp" if rng.random() < 0.5 else "nsp")
        j = int(rng.integers(0, st.d))
        t1 = joint_conditional(st, j, prior)
        t2 = joint_conditional(st2, j, prior)
        assert np.array_equal(t1, t2)


# -- two-node laws -----------------------------------------------------------


def test_stable_kernels_handle_empty_layers():
    # a node entering a layer with no prior member: the layer factor of the
    # stable closed forms degenerates (0 * sigma / 0) and must resolve to a
    # certain new subgroup, as the generic ratio path does
    prior = PriorSpec.hnsp(0.35, 0.6)
    twin = generic_twin(prior)
    st = FranchiseState.from_assignments([0, 0, 0, 1, 1], [0, 0, 1, -1, -1], [0, 0, 1, -1, -1])
    assert np.abs(joint_conditional(st, 1, prior) - joint_conditional(st, 1, twin)).max() < 1e-14
    assert np.abs(marginal_urn(st, 1, prior) - marginal_urn(st, 1, twin, method="general")).max() < 1e-14
    for jv, ju in [(1, 1), (0, 1)]:
        fast = coclustering_probability(st, jv, ju, prior)
        general = coclustering_probability(st, jv, ju, twin, method="general")
        assert fast == pytest.approx(general, abs=1e-14)
    empty = FranchiseState.empty([0, 0, 1])
    assert marginal_urn(empty, 0, prior)[0] == pytest.approx(1.0, abs=1e-15)
    assert coclustering_probability(empty, 0, 0, prior) == pytest.approx(
        coclustering_probability(empty, 0, 0, twin, method="general"), abs=1e-14
    )


def test_coclustering_frozen_values():
    same = FranchiseState.empty([0, 0])
    assert coclustering_probability(same, 0, 0, HDP11) == pytest.approx(0.75, abs=1e-12)
    cross = FranchiseState.empty([0, 1])
    assert coclustering_probability(cross, 0, 1, HDP11) == pytest.approx(0.5, abs=1e-12)
    # homophily: same-layer co-clustering beats cross-layer
    assert coclustering_probability(same, 0, 0, HNSP55) > coclustering_probability(
        cross, 0, 1, HNSP55
    )


def test_coclustering_identical_nodes_rejected_by_chain_oracle():
    st = FranchiseState.empty([0, 0])
    with pytest.raises(ValueError):
        coclustering_chain_rule(FranchiseState.from_assignments([0], [0], [0]), 0, 0, HDP11)


@pytest.mark.parametrize("family", ["dp", "nsp"])
def test_coclustering_matches_chain_rule_and_closed_forms(family):
    rng = np.random.default_rng(31)
    for _ in range(60):
        st = random_state(rng, max_nodes=12, spare=1)
        prior = random_prior(rng, family)
        jv = int(rng.integers(0, st.d))
        ju = int(rng.integers(0, st.d))
        fast = coclustering_probability(st, jv, ju, prior)
        general = coclustering_probability(st, jv, ju, prior, method="general")
        chain = coclustering_chain_rule(st, jv, ju, prior)
        assert 0.0 <= fast <= 1.0
        assert fast == pytest.approx(general, abs=1e-12)
        assert general == pytest.approx(chain, abs=1e-12)


# -- exact partition law ------------------------------------------------------


def test_peppf_trivial_cases():
    assert peppf_log_mass([[1]], HDP11) == pytest.approx(0.0, abs=1e-14)
    # d = 2, one node each: same profile plus different profiles exhausts
    same = math.exp(peppf_log_mass([[1], [1]], HDP11))
    diff = math.exp(peppf_log_mass([[1, 0], [0, 1]], HDP11))
    assert same + diff == pytest.approx(1.0, abs=1e-12)


def test_peppf_refuses_large_inputs():
    with pytest.raises(ValueError, match="cap"):
        peppf_log_mass(np.full((1, 1), 11), HDP11)


def test_peppf_matches_sequential_oracle_d2():
    err, total_seq, total_dir = compare_partition_masses([2, 1], HDP11)
    assert err < 1e-12
    assert total_seq == pytest.approx(1.0, abs=1e-12)
    assert total_dir == pytest.approx(1.0, abs=1e-12)


def test_peppf_kolmogorov_consistency():
    # marginalizing the placement of one extra node recovers the smaller law
    for prior in [HDP11, HNSP55, PriorSpec.hdp(0.6, 2.3)]:
        for sizes in [(2, 2), (3, 1), (2, 1, 1)]:
            reduced_sizes = list(sizes)
            j = 0
            reduced_sizes[j] -= 1
            grown = list(sizes)
            layer_of = np.repeat(np.arange(len(reduced_sizes)), reduced_sizes)
            total = int(layer_of.size)
            seen = set()
            for blocks in set_partitions(range(total)):
                z = np.empty(total, dtype=np.int64)
                for label, block in enumerate(blocks):
                    for v in block:
                        z[v] = label
                key = _canonical_key(layer_of, z) if total else ((),)
                if key in seen:
                    continue
                seen.add(key)
                arr = np.asarray(key, dtype=np.int64)
                base = math.exp(peppf_log_mass(arr, prior))
                marginal = 0.0
                h = arr.shape[1]
                for target in range(h):
                    grown_arr = arr.copy()
                    grown_arr[j, target] += 1
                    marginal += math.exp(peppf_log_mass(grown_arr, prior))
                fresh = np.zeros((arr.shape[0], h + 1), dtype=np.int64)
                fresh[:, :h] = arr
                fresh[j, h] = 1
                marginal += math.exp(peppf_log_mass(fresh, prior))
                assert marginal == pytest.approx(base, abs=1e-10)


def test_peppf_empty_layer_supported():
    # reduced states can empty a layer entirely
    assert math.exp(peppf_log_mass([[2], [0]], HDP11)) == pytest.approx(
        math.exp(peppf_log_mass([[2]], HDP11)), abs=1e-12
    )


# -- elicitation ----------------------------------------------------------------


def test_elicitation_frozen_conditions():
    layer_of = np.zeros(30, dtype=int)
    z = np.zeros(30, dtype=int)
    z[:-1] = 0
    w = np.zeros(30, dtype=int)
    z[-1] = -1
    w[-1] = -1
    st = FranchiseState.from_assignments(layer_of, z, w)
    report = elicitation_check(st, 0, PriorSpec.hdp(0.5, 4.0))
    assert report.condition_holds is True
    small = FranchiseState.from_assignments([0, 0, 0], [0, 0, -1], [0, 0, -1])
    report = elicitation_check(small, 0, PriorSpec.hdp(10.0, 1.0))
    assert report.condition_holds is False
    assert report.within_prob + report.across_prob + report.new_prob == pytest.approx(1.0, abs=1e-12)
    generic = elicitation_check(small, 0, generic_twin(HDP11))
    assert generic.condition_holds is None


def test_elicitation_condition_implies_within_dominates():
    rng = np.random.default_rng(41)
    checked = 0
    for _ in range(2000):
        st = random_state(rng, max_nodes=16)
        prior = random_prior(rng, "dp" if rng.random() < 0.5 else "nsp")
        j = int(rng.integers(0, st.d))
        if st.layer_count[j] < 1:
            continue
        report = elicitation_check(st, j, prior)
        if report.condition_holds:
            checked += 1
            assert report.within_prob >= report.outside_prob - 1e-12
    assert checked > 100
