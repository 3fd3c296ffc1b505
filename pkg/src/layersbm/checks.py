"""Enumeration oracles and validation suites.

Everything here re-derives quantities through an independent route and
compares against the closed-form implementations: partition sums for the
EPPFs, sequential-urn enumeration for the partition law, chain-rule
evaluation for co-clustering, and random-state sweeps for the closed-form
specializations.  The command line exposes these as ``check`` suites; the
test suite reuses them directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eppf import DirichletKernel, GenericKernel, StableKernel, set_partitions, validate_addition_rule
from .franchise import (
    FranchiseState,
    coclustering_probability,
    elicitation_check,
    joint_conditional,
    marginal_urn,
    peppf_log_mass,
)
from .priors import PriorSpec

__all__ = [
    "CheckResult",
    "sequential_partition_masses",
    "direct_partition_masses",
    "coclustering_chain_rule",
    "random_state",
    "generic_twin",
    "run_suite",
    "SUITES",
]


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: max abs error {self.max_error:.3e} <= {self.tolerance:.1e}{extra}"


def generic_twin(prior: PriorSpec) -> PriorSpec:
    """Same prior with both kernels forced through the generic ratio path."""
    return PriorSpec(
        GenericKernel(prior.level1.log_phi, name="twin-level1"),
        GenericKernel(prior.level0.log_phi, name="twin-level0"),
    )


# -- sequential-urn enumeration of the partition law ---------------------------


def _canonical_key(layer_of, z):
    """Frequency-array key with profile columns in order of first appearance."""
    labels = {}
    for v in range(len(z)):
        labels.setdefault(int(z[v]), len(labels))
    arr = np.zeros((int(np.max(layer_of)) + 1, len(labels)), dtype=np.int64)
    for v in range(len(z)):
        arr[layer_of[v], labels[int(z[v])]] += 1
    return tuple(map(tuple, arr))


def sequential_partition_masses(layer_sizes, prior: PriorSpec) -> dict:
    """Exact partition-law masses via exhaustive urn enumeration.

    Walks every (profile, subgroup) path node by node, multiplying the joint
    conditional probabilities, and aggregates paths by the canonical profile
    partition they induce.  Returns {frequency-array key: probability of one
    specific partition with that array}, together with the number of node
    partitions sharing each array under the key "_count".  Independent of the
    direct summation in :func:`layersbm.franchise.peppf_log_mass`.
    """
    layer_sizes = [int(s) for s in layer_sizes]
    layer_of = np.repeat(np.arange(len(layer_sizes)), layer_sizes)
    total = int(layer_of.size)
    masses: dict = {}
    counts: dict = {}

    state = FranchiseState.empty(layer_of)

    def partition_of(z):
        blocks = {}
        for v in range(total):
            blocks.setdefault(int(z[v]), []).append(v)
        return tuple(tuple(b) for b in blocks.values())

    seen_partitions = {}

    def recurse(v, log_p):
        if v == total:
            part = partition_of(state.z)
            if part not in seen_partitions:
                seen_partitions[part] = 0.0
            seen_partitions[part] += math.exp(log_p)
            return
        j = int(layer_of[v])
        table = joint_conditional(state, j, prior)
        big_h, num_sub = table.shape[0] - 1, table.shape[1] - 1
        for tau in range(num_sub + 1):
            if tau < num_sub:
                h = state.sub_profile[j][tau]
                p = table[h, tau]
                if p <= 0:
                    continue
                state.insert_node(v, h, tau)
                recurse(v + 1, log_p + math.log(p))
                state.detach_node(v)
            else:
                for h in range(big_h + 1):
                    p = table[h, tau]
                    if p <= 0:
                        continue
                    state.insert_node(v, h, tau)
                    recurse(v + 1, log_p + math.log(p))
                    state.detach_node(v)

    recurse(0, 0.0)

    for part, prob in seen_partitions.items():
        z = np.empty(total, dtype=np.int64)
        for label, block in enumerate(part):
            for v in block:
                z[v] = label
        key = _canonical_key(layer_of, z)
        if key in masses:
            # all partitions with equal frequency array must be equiprobable
            if abs(masses[key] - prob) > 1e-12:
                raise AssertionError("partial exchangeability violated in urn enumeration")
            counts[key] += 1
        else:
            masses[key] = prob
            counts[key] = 1
    masses["_count"] = counts
    return masses


def direct_partition_masses(layer_sizes, prior: PriorSpec) -> dict:
    """Partition-law masses from the direct summation formula, same keys."""
    layer_sizes = [int(s) for s in layer_sizes]
    layer_of = np.repeat(np.arange(len(layer_sizes)), layer_sizes)
    total = int(layer_of.size)
    masses = {}
    counts = {}
    for blocks in set_partitions(range(total)):
        z = np.empty(total, dtype=np.int64)
        for label, block in enumerate(blocks):
            for v in block:
                z[v] = label
        key = _canonical_key(layer_of, z)
        if key not in masses:
            masses[key] = math.exp(peppf_log_mass(np.asarray(key), prior, max_nodes=max(total, 1)))
            counts[key] = 1
        else:
            counts[key] += 1
    masses["_count"] = counts
    return masses


def compare_partition_masses(layer_sizes, prior: PriorSpec):
    """Max discrepancy between the urn and direct routes plus both totals."""
    seq = sequential_partition_masses(layer_sizes, prior)
    direct = direct_partition_masses(layer_sizes, prior)
    seq_counts = seq.pop("_count")
    dir_counts = direct.pop("_count")
    if set(seq) != set(direct) or seq_counts != dir_counts:
        raise AssertionError("urn and direct enumerations disagree on the support")
    max_err = max(abs(seq[k] - direct[k]) for k in direct)
    total_seq = sum(p * seq_counts[k] for k, p in seq.items())
    total_dir = sum(p * dir_counts[k] for k, p in direct.items())
    return max_err, total_seq, total_dir


# -- chain-rule co-clustering ---------------------------------------------------


def coclustering_chain_rule(state: FranchiseState, layer_v: int, layer_u: int, prior: PriorSpec) -> float:
    """P(two extra nodes share a profile) via sequential conditioning.

    Adds the first node through its joint conditional, then reads the second
    node's marginal urn at the matching profile; sums over all placements.
    """
    spare = [v for v in range(state.num_nodes) if state.z[v] < 0 and state.layer_of[v] == layer_v]
    if not spare:
        raise ValueError("state needs an unallocated node in layer_v for the chain rule")
    v = spare[0]
    total = 0.0
    table = joint_conditional(state, layer_v, prior)
    big_h, num_sub = table.shape[0] - 1, table.shape[1] - 1
    for tau in range(num_sub + 1):
        hs = [state.sub_profile[layer_v][tau]] if tau < num_sub else range(big_h + 1)
        for h in hs:
            p1 = table[h, tau]
            if p1 <= 0:
                continue
            state.insert_node(v, h, tau)
            p2 = marginal_urn(state, layer_u, prior, method="general")[h]
            state.detach_node(v)
            total += p1 * p2
    return total


# -- random states ----------------------------------------------------------------


def random_state(rng, max_nodes: int = 30, max_layers: int = 4, spare: int = 0) -> FranchiseState:
    """A random allocated franchise state for property sweeps.

    ``spare`` extra nodes per layer are left unallocated so callers can play
    incoming nodes.  Allocations are drawn from a Dirichlet prior with random
    concentrations, which reaches every admissible state.
    """
    d = int(rng.integers(1, max_layers + 1))
    sizes = rng.integers(1, max(2, max_nodes // d) + 1, size=d)
    layer_of = np.repeat(np.arange(d), sizes + spare)
    state = FranchiseState.empty(layer_of)
    prior = PriorSpec.hdp(float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.2, 3.0)))
    nodes = []
    offset = 0
    for j, s in enumerate(sizes):
        nodes.extend(range(offset, offset + int(s)))
        offset += int(s) + spare
    for v in nodes:
        table = joint_conditional(state, int(layer_of[v]), prior)
        flat = table.ravel()
        idx = int(rng.choice(flat.size, p=flat / flat.sum()))
        h, tau = divmod(idx, table.shape[1])
        state.insert_node(v, h, tau)
    return state


def random_prior(rng, family: str) -> PriorSpec:
    if family == "dp":
        return PriorSpec.hdp(float(rng.uniform(0.2, 4.0)), float(rng.uniform(0.2, 4.0)))
    return PriorSpec.hnsp(float(rng.uniform(0.05, 0.9)), float(rng.uniform(0.05, 0.9)))


# -- suites ------------------------------------------------------------------------


def _suite_eppf(max_n: int = 8, seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    results = []
    for name, kernel in [
        ("dp(theta=1.3)", DirichletKernel(1.3)),
        ("nsp(sigma=0.55)", StableKernel(0.55)),
    ]:
        err = validate_addition_rule(kernel, max_n=min(max_n, 8), tol=math.inf)
        results.append(CheckResult(f"eppf normalization+addition {name}", err, 1e-10))
        ratio_err = 0.0
        twin = GenericKernel(kernel.log_phi)
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            freqs = rng.integers(1, 6, size=k).tolist()
            pick = int(rng.integers(0, k + 1))
            cluster = None if pick == k else pick
            ratio_err = max(
                ratio_err,
                abs(kernel.log_ratio_add(freqs, cluster) - twin.log_ratio_add(freqs, cluster)),
            )
        results.append(CheckResult(f"eppf closed-form ratios {name}", ratio_err, 1e-12))
    return results


def _suite_peppf(max_n: int = 8, seed: int = 0) -> list:
    del seed
    results = []
    for fam, prior in [("hdp(1,1)", PriorSpec.hdp(1, 1)), ("hnsp(.5,.5)", PriorSpec.hnsp(0.5, 0.5))]:
        for sizes in [(2, 2), (3, 2)]:
            if sum(sizes) > max_n:
                continue
            err, total_seq, total_dir = compare_partition_masses(sizes, prior)
            results.append(
                CheckResult(f"partition-law urn vs direct {fam} V={sizes}", err, 1e-10)
            )
            results.append(
                CheckResult(
                    f"partition-law normalization {fam} V={sizes}",
                    max(abs(total_seq - 1.0), abs(total_dir - 1.0)),
                    1e-10,
                )
            )
    return results


def _suite_urns(max_n: int = 8, seed: int = 0, draws: int = 300) -> list:
    del max_n
    rng = np.random.default_rng(seed)
    joint_err = urn_err = 0.0
    for _ in range(draws):
        state = random_state(rng, max_nodes=20)
        fam = "dp" if rng.random() < 0.5 else "nsp"
        prior = random_prior(rng, fam)
        twin = generic_twin(prior)
        j = int(rng.integers(0, state.d))
        t_fast = joint_conditional(state, j, prior)
        t_gen = joint_conditional(state, j, twin)
        joint_err = max(joint_err, float(np.abs(t_fast - t_gen).max()))
        u_fast = marginal_urn(state, j, prior)
        u_gen = marginal_urn(state, j, twin, method="general")
        urn_err = max(urn_err, float(np.abs(u_fast - u_gen).max()))
        urn_err = max(urn_err, float(np.abs(t_fast.sum(axis=1) - u_fast).max()))
    return [
        CheckResult("joint conditional closed vs generic", joint_err, 1e-12),
        CheckResult("marginal urn closed vs row sums", urn_err, 1e-12),
    ]


def _suite_coclust(max_n: int = 8, seed: int = 0, draws: int = 120) -> list:
    del max_n
    rng = np.random.default_rng(seed)
    closed_err = chain_err = 0.0
    for _ in range(draws):
        state = random_state(rng, max_nodes=14, spare=1)
        fam = "dp" if rng.random() < 0.5 else "nsp"
        prior = random_prior(rng, fam)
        jv = int(rng.integers(0, state.d))
        ju = int(rng.integers(0, state.d))
        fast = coclustering_probability(state, jv, ju, prior)
        general = coclustering_probability(state, jv, ju, prior, method="general")
        closed_err = max(closed_err, abs(fast - general))
        chain = coclustering_chain_rule(state, jv, ju, prior)
        chain_err = max(chain_err, abs(general - chain))
    return [
        CheckResult("co-clustering closed vs general", closed_err, 1e-12),
        CheckResult("co-clustering general vs chain rule", chain_err, 1e-12),
    ]


def _suite_elicit(max_n: int = 8, seed: int = 0, draws: int = 10_000) -> list:
    del max_n
    rng = np.random.default_rng(seed)
    violations = 0
    checked = 0
    for _ in range(draws):
        state = random_state(rng, max_nodes=16)
        fam = "dp" if rng.random() < 0.5 else "nsp"
        prior = random_prior(rng, fam)
        j = int(rng.integers(0, state.d))
        if state.layer_count[j] < 1:
            continue
        report = elicitation_check(state, j, prior)
        if report.condition_holds:
            checked += 1
            if report.within_prob < report.outside_prob - 1e-12:
                violations += 1
    return [
        CheckResult(
            "homophily condition implies within >= outside",
            float(violations),
            0.0,
            detail=f"{checked} states with the condition active",
        )
    ]


SUITES = {
    "eppf": _suite_eppf,
    "peppf": _suite_peppf,
    "urns": _suite_urns,
    "coclust": _suite_coclust,
    "elicit": _suite_elicit,
}


def run_suite(name: str, max_n: int = 8, seed: int = 0) -> list:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](max_n=max_n, seed=seed)
