"""Synthetic networks and prior-predictive partition draws.

The two benchmark scenarios mimic a pyramidal criminal-organization layout:
four layers (30, 30, 15, 5 nodes), where each of the first three layers has
a large affiliate group and a small supervisor group, a shared cross-layer
group spans layers one to three, and the last layer is a single top group.
That yields eight true groups.  Scenario 1 separates the blocks strongly,
Scenario 2 compresses the probabilities toward each other.  The numeric
probability values here are calibration choices with the stated structure,
not published constants, and can be overridden with an explicit matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .franchise import FranchiseState, canonical_labels, joint_conditional
from .network import SupraNetwork
from .priors import PriorSpec

__all__ = ["ScenarioSpec", "scenario_spec", "generate_scenario", "sample_prior_partition"]

DEFAULT_LAYER_SIZES = (30, 30, 15, 5)

# block roles, scenario 1 / scenario 2 edge probabilities
_PROBS = {
    1: {"within": 0.75, "boss_link": 0.6, "supervisor_link": 0.4, "background": 0.05},
    2: {"within": 0.50, "boss_link": 0.45, "supervisor_link": 0.35, "background": 0.20},
}


@dataclass
class ScenarioSpec:
    """Layer sizes, true allocation, block probability matrix, seed."""

    layer_sizes: tuple
    z0: np.ndarray
    psi: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=np.int64)
        self.psi = np.asarray(self.psi, dtype=np.float64)
        if self.z0.size != sum(self.layer_sizes):
            raise ValueError("z0 must allocate every node")
        h = int(self.z0.max()) + 1
        if self.psi.shape != (h, h):
            raise ValueError(f"psi must be {h}x{h} for {h} groups")
        if np.any(self.psi != self.psi.T) or np.any((self.psi < 0) | (self.psi > 1)):
            raise ValueError("psi must be symmetric with entries in [0, 1]")

    @property
    def num_groups(self) -> int:
        return int(self.z0.max()) + 1


def _pyramid_allocation(layer_sizes):
    """True groups: per-layer affiliates and supervisors in the first three
    layers, one shared cross-layer group, one top group in the last layer.

    Returns (z0, roles) with roles tagging each group as 'affiliate',
    'supervisor', 'shared' or 'top'.
    """
    if len(layer_sizes) != 4 or any(s < 1 for s in layer_sizes):
        raise ValueError("the pyramid layout needs four non-empty layers")
    z0 = []
    roles = []
    shared_label = None
    for j, size in enumerate(layer_sizes[:3]):
        n_sup = max(4, round(size / 5))
        n_shared = max(3, round(size / 8))
        n_aff = size - n_sup - n_shared
        if n_aff < 1:
            raise ValueError(f"layer {j} too small for the pyramid layout")
        aff = len(roles)
        roles.append("affiliate")
        sup = len(roles)
        roles.append("supervisor")
        if shared_label is None:
            shared_label = len(roles)
            roles.append("shared")
        z0.extend([aff] * n_aff + [sup] * n_sup + [shared_label] * n_shared)
    top = len(roles)
    roles.append("top")
    z0.extend([top] * layer_sizes[3])
    return np.array(z0, dtype=np.int64), roles


def _pyramid_psi(roles, scenario: int) -> np.ndarray:
    p = _PROBS[scenario]
    h = len(roles)
    psi = np.full((h, h), p["background"])
    np.fill_diagonal(psi, p["within"])
    # affiliates talk to their own supervisors; supervisors and the top
    # group talk to the shared cross-layer group
    shared = roles.index("shared")
    top = roles.index("top")
    for g, role in enumerate(roles):
        if role == "supervisor":
            psi[g - 1, g] = psi[g, g - 1] = p["supervisor_link"]
            psi[g, shared] = psi[shared, g] = p["boss_link"]
    psi[shared, top] = psi[top, shared] = p["boss_link"]
    return psi


def scenario_spec(scenario: int, seed: int = 0, layer_sizes=DEFAULT_LAYER_SIZES, psi=None) -> ScenarioSpec:
    """Build the benchmark spec for scenario 1 or 2, optionally overriding psi."""
    if scenario not in _PROBS:
        raise ValueError("scenario must be 1 or 2")
    z0, roles = _pyramid_allocation(tuple(layer_sizes))
    matrix = _pyramid_psi(roles, scenario) if psi is None else np.asarray(psi, dtype=float)
    return ScenarioSpec(tuple(layer_sizes), z0, matrix, seed)


def generate_scenario(spec: ScenarioSpec):
    """Draw a network: each dyad is an independent Bernoulli with the block
    probability of its true groups.  Returns (network, z0)."""
    rng = np.random.default_rng(spec.seed)
    sizes = np.asarray(spec.layer_sizes, dtype=np.int64)
    layer_of = np.repeat(np.arange(sizes.size), sizes)
    v = int(sizes.sum())
    probs = spec.psi[spec.z0[:, None], spec.z0[None, :]]
    draws = rng.random((v, v))
    upper = np.triu(draws < probs, 1)
    adj = upper | upper.T
    return SupraNetwork(adj, layer_of, sizes), spec.z0.copy()


def sample_prior_partition(layer_sizes, prior: PriorSpec, rng):
    """One draw of (z, w) from the partition prior via the sequential urn."""
    sizes = np.asarray(layer_sizes, dtype=np.int64)
    layer_of = np.repeat(np.arange(sizes.size), sizes)
    state = FranchiseState.empty(layer_of)
    for v in range(layer_of.size):
        j = int(layer_of[v])
        table = joint_conditional(state, j, prior)
        flat = table.ravel()
        idx = int(np.searchsorted(np.cumsum(flat), rng.random() * flat.sum(), side="right"))
        idx = min(idx, flat.size - 1)
        h, tau = divmod(idx, table.shape[1])
        state.insert_node(v, h, tau)
    return canonical_labels(layer_of, state.z, state.w)
