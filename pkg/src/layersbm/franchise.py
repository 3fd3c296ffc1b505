"""Two-level restaurant-franchise state over nodes and its predictive laws.

Nodes enter within-layer subgroups ("tables"); every subgroup carries a
sociability profile ("dish") drawn from a list shared by all layers; nodes
with the same profile form the final clusters.  This module owns the mutable
count state (subgroup occupancies ``q``, per-layer-per-profile subgroup
counts ``ell``, node counts ``n``) and every closed-form probability built
on it:

* ``joint_conditional``  - the (profile, subgroup) table for one node given
  the rest, the object the collapsed Gibbs sampler and the sequential
  predictive scheme both consume;
* ``marginal_urn``       - the profile law with subgroups summed out;
* ``coclustering_probability`` - the prior probability that two removed
  nodes share a profile, within or across layers;
* ``peppf_log_mass``     - exact enumeration of the partition-law mass of a
  frequency array, for small node counts;
* ``elicitation_check``  - the within-versus-across layer probability
  comparison and the hyperparameter conditions that guarantee homophily.

Every probability is assembled from one-step EPPF ratios in log space, so
closed-form Dirichlet / stable kernels and generic evaluators run through
the same code path and can be compared exactly.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .eppf import NEW_CLUSTER, EppfKernel
from .priors import PriorSpec

__all__ = [
    "FranchiseState",
    "RemovalRecord",
    "canonical_labels",
    "joint_conditional",
    "marginal_urn",
    "coclustering_probability",
    "peppf_log_mass",
    "elicitation_check",
    "ElicitationReport",
]


def canonical_labels(layer_of, z, w):
    """Relabel (z, w) in order of first appearance; profiles globally,
    subgroups within each layer.  Unallocated (-1) entries pass through."""
    layer_of = np.asarray(layer_of)
    z = np.asarray(z)
    w = np.asarray(w)
    new_z = z.copy()
    new_w = w.copy()
    zmap: dict = {}
    wmaps: dict = {}
    for v in np.flatnonzero(z >= 0):
        j = int(layer_of[v])
        new_z[v] = zmap.setdefault(int(z[v]), len(zmap))
        wmap = wmaps.setdefault(j, {})
        new_w[v] = wmap.setdefault(int(w[v]), len(wmap))
    return new_z, new_w


@dataclass
class RemovalRecord:
    """Undo information for :meth:`FranchiseState.remove_node`."""

    node: int
    z_before: np.ndarray
    w_before: np.ndarray


class FranchiseState:
    """Allocation state: profiles ``z``, subgroups ``w``, derived counts.

    Unallocated nodes carry label -1 in both ``z`` and ``w``.  Labels of
    allocated nodes are always compact (0..H-1 profiles, 0..ell_row[j]-1
    subgroups per layer); the public mutators additionally keep them in
    order of first appearance.  Single writer; frozen states may be read
    from many threads.
    """

    def __init__(self, layer_of):
        self.layer_of = np.asarray(layer_of, dtype=np.int64)
        if self.layer_of.ndim != 1 or self.layer_of.size == 0:
            raise ValueError("layer_of must be a non-empty 1-d array")
        self.d = int(self.layer_of.max()) + 1
        v = self.layer_of.size
        self.z = np.full(v, -1, dtype=np.int64)
        self.w = np.full(v, -1, dtype=np.int64)
        self.sub_profile = [[] for _ in range(self.d)]  # layer -> tau -> profile
        self.sub_size = [[] for _ in range(self.d)]  # layer -> tau -> occupancy
        self.ell = np.zeros((self.d, 0), dtype=np.int64)
        self.n = np.zeros((self.d, 0), dtype=np.int64)
        self.layer_count = np.zeros(self.d, dtype=np.int64)

    # -- constructors --------------------------------------------------------

    @classmethod
    def empty(cls, layer_of) -> "FranchiseState":
        return cls(layer_of)

    @classmethod
    def singletons(cls, layer_of) -> "FranchiseState":
        """Every node in its own subgroup and profile (the default sampler init)."""
        state = cls(layer_of)
        for v in range(state.num_nodes):
            state.insert_node(v, state.num_profiles, state.ell_row(state.layer_of[v]))
        return state

    @classmethod
    def one_block(cls, layer_of) -> "FranchiseState":
        """All nodes in a single profile, one subgroup per layer."""
        state = cls(layer_of)
        for v in range(state.num_nodes):
            state.insert_node(v, 0, 0)
        return state

    @classmethod
    def from_assignments(cls, layer_of, z, w) -> "FranchiseState":
        """Build a state from coherent (z, w) vectors; -1 marks unallocated.

        Labels must be compact (every profile 0..max(z) and, per layer, every
        subgroup 0..max(w) occupied) and each subgroup must carry one profile.
        """
        state = cls(layer_of)
        z = np.asarray(z, dtype=np.int64)
        w = np.asarray(w, dtype=np.int64)
        if z.shape != state.z.shape or w.shape != state.w.shape:
            raise ValueError("z and w must have one entry per node")
        if np.any((z < 0) != (w < 0)):
            raise ValueError("z and w must be unallocated (-1) together")
        alloc = np.flatnonzero(z >= 0)
        if alloc.size == 0:
            return state
        big_h = int(z[alloc].max()) + 1
        state.ell = np.zeros((state.d, big_h), dtype=np.int64)
        state.n = np.zeros((state.d, big_h), dtype=np.int64)
        for j in range(state.d):
            members = alloc[state.layer_of[alloc] == j]
            if members.size == 0:
                continue
            wj = w[members]
            zj = z[members]
            num_sub = int(wj.max()) + 1
            sizes = np.bincount(wj, minlength=num_sub)
            if sizes.min() == 0:
                raise ValueError(f"subgroup labels of layer {j} are not compact")
            prof = np.full(num_sub, -1, dtype=np.int64)
            for tau, h in zip(wj, zj):
                if prof[tau] < 0:
                    prof[tau] = h
                elif prof[tau] != h:
                    raise ValueError(
                        f"subgroup {tau} of layer {j} carries profiles {prof[tau]} and {h}"
                    )
            state.sub_profile[j] = prof.tolist()
            state.sub_size[j] = sizes.tolist()
            state.ell[j] = np.bincount(prof, minlength=big_h)
            state.n[j] = np.bincount(zj, minlength=big_h)
            state.layer_count[j] = members.size
        if np.any(state.ell_col < 1):
            raise ValueError("profile labels are not compact")
        state.z = z.copy()
        state.w = w.copy()
        return state

    # -- basic accessors -----------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return self.layer_of.size

    @property
    def num_allocated(self) -> int:
        return int(self.layer_count.sum())

    @property
    def num_profiles(self) -> int:
        return self.ell.shape[1]

    def ell_row(self, j: int) -> int:
        """Number of subgroups in layer j."""
        return len(self.sub_profile[j])

    @property
    def ell_col(self) -> np.ndarray:
        """Subgroups per profile, summed over layers."""
        return self.ell.sum(axis=0)

    @property
    def ell_total(self) -> int:
        return int(self.ell.sum())

    @property
    def profile_sizes(self) -> np.ndarray:
        return self.n.sum(axis=0)

    def profiles_in_layer(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.n[j] > 0)

    def subgroups_with_profile(self, j: int, h: int) -> list:
        return [t for t, p in enumerate(self.sub_profile[j]) if p == h]

    # -- mutators -------------------------------------------------------------

    def insert_node(self, v: int, h: int, tau: int):
        """Allocate node ``v`` to profile ``h`` at subgroup ``tau`` of its layer.

        ``tau == ell_row(layer)`` opens a new subgroup; ``h == num_profiles``
        additionally opens a new profile (only valid with a new subgroup).
        """
        if self.z[v] >= 0:
            raise ValueError(f"node {v} is already allocated")
        j = int(self.layer_of[v])
        num_sub = self.ell_row(j)
        big_h = self.num_profiles
        if not 0 <= tau <= num_sub:
            raise ValueError(f"subgroup {tau} out of range for layer {j}")
        if tau < num_sub:
            if h != self.sub_profile[j][tau]:
                raise ValueError(
                    f"subgroup {tau} of layer {j} carries profile "
                    f"{self.sub_profile[j][tau]}; cannot join it with profile {h}"
                )
            self.sub_size[j][tau] += 1
        else:
            if not 0 <= h <= big_h:
                raise ValueError(f"profile {h} out of range")
            if h == big_h:
                self.ell = np.pad(self.ell, ((0, 0), (0, 1)))
                self.n = np.pad(self.n, ((0, 0), (0, 1)))
            self.sub_profile[j].append(h)
            self.sub_size[j].append(1)
            self.ell[j, h] += 1
        self.n[j, h] += 1
        self.layer_count[j] += 1
        self.z[v] = h
        self.w[v] = tau

    def detach_node(self, v: int):
        """Remove node ``v`` keeping labels compact (not re-canonicalized).

        Returns ``(h, tau, dead_profile)`` where ``dead_profile`` is the index
        of the profile deleted by this removal, or -1 if none died.
        """
        h, tau = int(self.z[v]), int(self.w[v])
        if h < 0:
            raise ValueError(f"node {v} is not allocated")
        j = int(self.layer_of[v])
        self.z[v] = self.w[v] = -1
        self.layer_count[j] -= 1
        self.n[j, h] -= 1
        self.sub_size[j][tau] -= 1
        dead_profile = -1
        if self.sub_size[j][tau] == 0:
            del self.sub_size[j][tau]
            del self.sub_profile[j][tau]
            mask = (self.layer_of == j) & (self.w > tau)
            self.w[mask] -= 1
            self.ell[j, h] -= 1
            if self.ell[:, h].sum() == 0:
                dead_profile = h
                keep = np.arange(self.num_profiles) != h
                self.ell = self.ell[:, keep]
                self.n = self.n[:, keep]
                self.z[self.z > h] -= 1
                for jj in range(self.d):
                    self.sub_profile[jj] = [p - 1 if p > h else p for p in self.sub_profile[jj]]
        return h, tau, dead_profile

    def remove_node(self, v: int) -> RemovalRecord:
        """Remove node ``v`` and restore order-of-appearance labels.

        Returns a record from which :meth:`undo_remove` rebuilds the exact
        prior state, counts included.
        """
        record = RemovalRecord(v, self.z.copy(), self.w.copy())
        self.detach_node(v)
        self.canonicalize()
        return record

    def undo_remove(self, record: RemovalRecord):
        rebuilt = FranchiseState.from_assignments(self.layer_of, record.z_before, record.w_before)
        self.z = rebuilt.z
        self.w = rebuilt.w
        self.sub_profile = rebuilt.sub_profile
        self.sub_size = rebuilt.sub_size
        self.ell = rebuilt.ell
        self.n = rebuilt.n
        self.layer_count = rebuilt.layer_count

    def canonicalize(self):
        """Relabel profiles and subgroups in order of first appearance."""
        alloc = np.flatnonzero(self.z >= 0)
        zmap = {}
        for v in alloc:
            zmap.setdefault(int(self.z[v]), len(zmap))
        wmaps = [dict() for _ in range(self.d)]
        for v in alloc:
            wmaps[self.layer_of[v]].setdefault(int(self.w[v]), len(wmaps[self.layer_of[v]]))
        new_z = self.z.copy()
        new_w = self.w.copy()
        for v in alloc:
            new_z[v] = zmap[int(self.z[v])]
            new_w[v] = wmaps[self.layer_of[v]][int(self.w[v])]
        perm = np.argsort([zmap[h] for h in range(self.num_profiles)]) if zmap else np.arange(0)
        self.ell = self.ell[:, perm] if zmap else self.ell
        self.n = self.n[:, perm] if zmap else self.n
        for j in range(self.d):
            wm = wmaps[j]
            order = sorted(wm, key=wm.get)
            self.sub_profile[j] = [zmap[self.sub_profile[j][t]] for t in order]
            self.sub_size[j] = [self.sub_size[j][t] for t in order]
        self.z = new_z
        self.w = new_w

    def copy(self) -> "FranchiseState":
        out = FranchiseState(self.layer_of)
        out.z = self.z.copy()
        out.w = self.w.copy()
        out.sub_profile = [list(p) for p in self.sub_profile]
        out.sub_size = [list(s) for s in self.sub_size]
        out.ell = self.ell.copy()
        out.n = self.n.copy()
        out.layer_count = self.layer_count.copy()
        return out

    # -- integrity -------------------------------------------------------------

    def check_consistency(self, canonical: bool = False):
        """Recompute all derived counts from (z, w) and compare exactly.

        Labels must be compact; with ``canonical=True`` they must also follow
        order of first appearance.
        """
        alloc = np.flatnonzero(self.z >= 0)
        if np.any((self.z < 0) != (self.w < 0)):
            raise AssertionError("z and w must be unallocated together")
        used = sorted(set(int(h) for h in self.z[alloc]))
        if used != list(range(self.num_profiles)):
            raise AssertionError("profile labels are not compact")
        ell = np.zeros_like(self.ell)
        n = np.zeros_like(self.n)
        for j in range(self.d):
            members = alloc[self.layer_of[alloc] == j]
            taus = sorted(set(int(t) for t in self.w[members]))
            if taus != list(range(self.ell_row(j))):
                raise AssertionError(f"subgroup labels of layer {j} are not compact")
            for tau in taus:
                in_tau = members[self.w[members] == tau]
                profiles = set(int(h) for h in self.z[in_tau])
                if len(profiles) != 1 or profiles.pop() != self.sub_profile[j][tau]:
                    raise AssertionError(f"subgroup ({j}, {tau}) carries mixed or wrong profiles")
                if in_tau.size != self.sub_size[j][tau]:
                    raise AssertionError(f"subgroup ({j}, {tau}) occupancy diverged")
                ell[j, self.sub_profile[j][tau]] += 1
                n[j, self.sub_profile[j][tau]] += in_tau.size
            if members.size != self.layer_count[j]:
                raise AssertionError(f"layer {j} count diverged")
        if not (np.array_equal(ell, self.ell) and np.array_equal(n, self.n)):
            raise AssertionError("ell / n count matrices diverged from (z, w)")
        if self.num_profiles and np.any(self.ell_col < 1):
            raise AssertionError("empty profile present")
        if canonical:
            ref = self.copy()
            ref.canonicalize()
            if not (np.array_equal(ref.z, self.z) and np.array_equal(ref.w, self.w)):
                raise AssertionError("labels are not in order of appearance")

    def to_json(self) -> str:
        return json.dumps(
            {
                "layer_of": self.layer_of.tolist(),
                "z": self.z.tolist(),
                "w": self.w.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FranchiseState":
        payload = json.loads(text)
        return cls.from_assignments(payload["layer_of"], payload["z"], payload["w"])


# -- one-node conditional laws ----------------------------------------------


def joint_conditional(state: FranchiseState, layer: int, prior: PriorSpec) -> np.ndarray:
    """Prior (profile, subgroup) table for one extra node entering ``layer``.

    Returns a (H+1) x (L+1) array, H and L the reduced state's profile and
    layer-subgroup counts.  Column ``tau`` < L has its single non-zero entry
    at that subgroup's profile; the last column holds the new-subgroup
    probabilities for every profile, known or new.  Entries sum to one by
    construction (no renormalization is applied).
    """
    level1, level0 = prior.level1, prior.level0
    j = int(layer)
    big_h = state.num_profiles
    num_sub = state.ell_row(j)
    sizes = state.sub_size[j]
    ell_col = state.ell_col
    table = np.zeros((big_h + 1, num_sub + 1))
    for tau in range(num_sub):
        h = state.sub_profile[j][tau]
        table[h, tau] = math.exp(level1.log_ratio_add(sizes, tau))
    log_new_sub = level1.log_ratio_add(sizes, NEW_CLUSTER)
    for h in range(big_h):
        table[h, num_sub] = math.exp(log_new_sub + level0.log_ratio_add(ell_col, h))
    table[big_h, num_sub] = math.exp(log_new_sub + level0.log_ratio_add(ell_col, NEW_CLUSTER))
    return table


def _urn_dp(state, j, theta, theta0):
    c = int(state.layer_count[j])
    ell_col = state.ell_col
    ell_tot = state.ell_total
    big_h = state.num_profiles
    out = np.empty(big_h + 1)
    layer_new = theta / (theta + c)
    level0_den = theta0 + ell_tot
    out[:big_h] = (ell_col / level0_den) * layer_new + state.n[j] / (theta + c)
    out[big_h] = (theta0 / level0_den) * layer_new
    return out


def _urn_nsp(state, j, sigma, sigma0):
    c = int(state.layer_count[j])
    ell_col = state.ell_col.astype(float)
    ell_tot = state.ell_total
    big_h = state.num_profiles
    out = np.empty(big_h + 1)
    layer_new = (state.ell_row(j) * sigma / c) if c > 0 else 1.0
    if big_h > 0:
        out[:big_h] = (ell_col - sigma0) / ell_tot * layer_new
        if c > 0:
            out[:big_h] += (state.n[j] - state.ell[j] * sigma) / c
        out[big_h] = big_h * sigma0 / ell_tot * layer_new
    else:
        out[big_h] = layer_new
    return out


def marginal_urn(state: FranchiseState, layer: int, prior: PriorSpec, method: str = "auto") -> np.ndarray:
    """Profile probabilities for one extra node in ``layer``: length H+1.

    ``method='auto'`` uses the closed Dirichlet / stable forms when both
    levels share the family, otherwise sums the joint table over subgroups;
    ``method='general'`` forces the summation path.
    """
    if method == "auto" and prior.family == "dp":
        return _urn_dp(state, layer, prior.level1.theta, prior.level0.theta)
    if method == "auto" and prior.family == "nsp":
        return _urn_nsp(state, layer, prior.level1.sigma, prior.level0.sigma)
    table = joint_conditional(state, layer, prior)
    return table.sum(axis=1)


# -- two-node co-clustering ---------------------------------------------------


def _lphi(kernel: EppfKernel, freqs) -> float:
    """log EPPF with the empty-partition convention phi() = 1."""
    freqs = list(freqs)
    return kernel.log_phi(freqs) if freqs else 0.0


def _coclustering_general(state, jv, ju, prior: PriorSpec) -> float:
    level1, level0 = prior.level1, prior.level0
    big_h = state.num_profiles
    ell_col = list(state.ell_col)
    log_phi0 = _lphi(level0, ell_col)

    def level0_one(h):
        grown = ell_col + [1] if h == big_h else [c + (1 if i == h else 0) for i, c in enumerate(ell_col)]
        return math.exp(_lphi(level0, grown) - log_phi0)

    def level0_two(h):
        grown = ell_col + [2] if h == big_h else [c + (2 if i == h else 0) for i, c in enumerate(ell_col)]
        return math.exp(_lphi(level0, grown) - log_phi0)

    if jv == ju:
        q = list(state.sub_size[jv])
        base = _lphi(level1, q)
        both_new = math.exp(_lphi(level1, q + [2]) - base)
        two_new = math.exp(_lphi(level1, q + [1, 1]) - base)
        total = 0.0
        for h in range(big_h + 1):
            taus = state.subgroups_with_profile(jv, h) if h < big_h else []
            a_term = 0.0
            d_term = 0.0
            for t in taus:
                grown = list(q)
                grown[t] += 2
                a_term += math.exp(_lphi(level1, grown) - base)
                grown[t] -= 1
                d_term += math.exp(_lphi(level1, grown + [1]) - base)
            for t, t2 in itertools.combinations(taus, 2):
                grown = list(q)
                grown[t] += 1
                grown[t2] += 1
                a_term += 2.0 * math.exp(_lphi(level1, grown) - base)
            total += a_term
            total += level0_one(h) * (both_new + 2.0 * d_term)
            total += level0_two(h) * two_new
        return total

    qv = list(state.sub_size[jv])
    qu = list(state.sub_size[ju])
    base_v = _lphi(level1, qv)
    base_u = _lphi(level1, qu)
    new_v = math.exp(_lphi(level1, qv + [1]) - base_v)
    new_u = math.exp(_lphi(level1, qu + [1]) - base_u)
    total = 0.0
    for h in range(big_h + 1):
        join_v = 0.0
        for t in state.subgroups_with_profile(jv, h) if h < big_h else []:
            grown = list(qv)
            grown[t] += 1
            join_v += math.exp(_lphi(level1, grown) - base_v)
        join_u = 0.0
        for t in state.subgroups_with_profile(ju, h) if h < big_h else []:
            grown = list(qu)
            grown[t] += 1
            join_u += math.exp(_lphi(level1, grown) - base_u)
        one = level0_one(h)
        total += join_v * join_u
        total += one * new_v * join_u + one * new_u * join_v
        total += level0_two(h) * new_v * new_u
    return total


def _coclustering_dp(state, jv, ju, theta, theta0):
    ell_col = state.ell_col.astype(float)
    ell_tot = float(state.ell_total)
    theta0_term = float((ell_col * (ell_col + 1)).sum()) + theta0
    lvl0 = theta0 + ell_tot
    if jv == ju:
        c = float(state.layer_count[jv])
        nj = state.n[jv].astype(float)
        inner = (
            float((nj * (nj + 1)).sum())
            + theta * (1.0 + 2.0 / lvl0 * float((nj * ell_col).sum()))
            + theta**2 / (lvl0 * (lvl0 + 1.0)) * theta0_term
        )
        return inner / ((theta + c) * (theta + c + 1.0))
    cv = float(state.layer_count[jv])
    cu = float(state.layer_count[ju])
    nv = state.n[jv].astype(float)
    nu = state.n[ju].astype(float)
    inner = (
        float((nv * nu).sum())
        + theta / lvl0 * float((ell_col * (nv + nu)).sum())
        + theta**2 / (lvl0 * (lvl0 + 1.0)) * theta0_term
    )
    return inner / ((theta + cv) * (theta + cu))


def _coclustering_nsp(state, jv, ju, sigma, sigma0):
    ell_col = state.ell_col.astype(float)
    ell_tot = float(state.ell_total)
    big_h = state.num_profiles
    tail = float(((ell_col - sigma0) * (ell_col - sigma0 + 1)).sum()) + big_h * sigma0 * (1 - sigma0)
    if jv == ju:
        c = float(state.layer_count[jv])
        if c < 1:
            return None  # degenerate denominators; caller falls back
        nj = state.n[jv] - state.ell[jv] * sigma
        lrow = float(state.ell_row(jv))
        inner = (
            float((nj * (nj + 1)).sum())
            + lrow * sigma * ((1 - sigma) + 2.0 / ell_tot * float((nj * (ell_col - sigma0)).sum()))
            + lrow * (lrow + 1) * sigma**2 / (ell_tot * (ell_tot + 1)) * tail
        )
        return inner / (c * (c + 1.0))
    cv = float(state.layer_count[jv])
    cu = float(state.layer_count[ju])
    if cv < 1 or cu < 1:
        return None
    nv = state.n[jv] - state.ell[jv] * sigma
    nu = state.n[ju] - state.ell[ju] * sigma
    lv = float(state.ell_row(jv))
    lu = float(state.ell_row(ju))
    inner = (
        float((nv * nu).sum())
        + sigma / ell_tot * (lv * float((nu * (ell_col - sigma0)).sum()) + lu * float((nv * (ell_col - sigma0)).sum()))
        + lv * lu * sigma**2 / (ell_tot * (ell_tot + 1)) * tail
    )
    return inner / (cv * cu)


def coclustering_probability(
    state: FranchiseState,
    layer_v: int,
    layer_u: int,
    prior: PriorSpec,
    method: str = "auto",
) -> float:
    """Prior probability that two extra nodes share a profile.

    The state must already exclude both nodes; ``layer_v`` / ``layer_u`` are
    their layers.  Closed Dirichlet / stable forms are used when available
    (the stable ones degenerate when a touched layer is empty, in which case
    the general ratio path takes over).
    """
    if method == "auto":
        if prior.family == "dp":
            return float(_coclustering_dp(state, layer_v, layer_u, prior.level1.theta, prior.level0.theta))
        if prior.family == "nsp":
            value = _coclustering_nsp(state, layer_v, layer_u, prior.level1.sigma, prior.level0.sigma)
            if value is not None:
                return float(value)
    return float(_coclustering_general(state, layer_v, layer_u, prior))


# -- exact partition-law mass --------------------------------------------------


def _compositions(total: int, parts: int):
    """Ordered tuples of ``parts`` positive integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def peppf_log_mass(frequencies, prior: PriorSpec, max_nodes: int = 10) -> float:
    """Exact log mass of one specific partition with frequency array ``n``.

    ``frequencies`` is a (layers x profiles) array of non-negative counts,
    every profile column occupied somewhere.  The mass sums, over all
    admissible subgroup-count arrays and subgroup occupancy compositions,
    the product of the two EPPF levels weighted by multinomial coefficients
    and divided by the per-cell subgroup factorials.  Enumeration is
    exponential, so node counts above ``max_nodes`` are refused.
    """
    n = np.atleast_2d(np.asarray(frequencies, dtype=np.int64))
    if np.any(n < 0):
        raise ValueError("frequencies must be non-negative")
    if n.shape[1] and np.any(n.sum(axis=0) < 1):
        raise ValueError("every profile column must be occupied in some layer")
    total = int(n.sum())
    if total > max_nodes:
        raise ValueError(f"refusing exact enumeration for {total} nodes (cap {max_nodes})")
    if total == 0:
        return 0.0
    d, big_h = n.shape
    level1, level0 = prior.level1, prior.level0

    cells = [(j, h) for j in range(d) for h in range(big_h) if n[j, h] > 0]
    log_terms = []
    for ell_choice in itertools.product(*(range(1, n[j, h] + 1) for j, h in cells)):
        ell = np.zeros((d, big_h), dtype=np.int64)
        for (j, h), val in zip(cells, ell_choice):
            ell[j, h] = val
        log_term = _lphi(level0, ell.sum(axis=0))
        for j in range(d):
            layer_cells = [(h, ell[j, h]) for h in range(big_h) if ell[j, h] > 0]
            if not layer_cells:
                continue
            weights = []
            for combo in itertools.product(
                *(_compositions(int(n[j, h]), int(k)) for h, k in layer_cells)
            ):
                log_w = 0.0
                q_all = []
                for (h, k), q in zip(layer_cells, combo):
                    qa = np.asarray(q, dtype=np.int64)
                    log_w += gammaln(n[j, h] + 1) - float(gammaln(qa + 1).sum())
                    log_w -= gammaln(k + 1)
                    q_all.extend(q)
                weights.append(log_w + level1.log_phi(q_all))
            log_term += logsumexp(weights)
        log_terms.append(log_term)
    return float(logsumexp(log_terms))


# -- prior elicitation ----------------------------------------------------------


@dataclass
class ElicitationReport:
    """Within / across / new profile probabilities for one extra node."""

    within_prob: float
    across_prob: float
    new_prob: float
    condition_holds: bool | None

    @property
    def outside_prob(self) -> float:
        return self.across_prob + self.new_prob


def elicitation_check(state: FranchiseState, layer: int, prior: PriorSpec) -> ElicitationReport:
    """Compare the chances of in-layer versus out-of-layer profiles.

    ``within_prob`` sums the urn over profiles already observed in the node's
    layer, ``across_prob`` over profiles seen only elsewhere, ``new_prob`` is
    the fresh-profile mass.  ``condition_holds`` evaluates the sufficient
    hyperparameter condition under which within >= across + new is guaranteed:
    theta <= V_j - 1 for Dirichlet kernels, and for stable kernels
    sigma <= 0.5 / (1 + (V_j - 1) sigma0 / d), with V_j counting the incoming
    node itself.  The conditions presume a non-empty layer; with no prior
    same-layer node the report carries ``condition_holds = False``.  Generic
    kernels report probabilities only (``condition_holds = None``).
    """
    urn = marginal_urn(state, layer, prior)
    in_layer = state.profiles_in_layer(layer)
    mask = np.zeros(state.num_profiles, dtype=bool)
    mask[in_layer] = True
    within = float(urn[:-1][mask].sum())
    across = float(urn[:-1][~mask].sum())
    new = float(urn[-1])
    vj = int(state.layer_count[layer]) + 1
    if prior.family == "dp":
        holds = vj >= 2 and prior.level1.theta <= vj - 1
    elif prior.family == "nsp":
        holds = vj >= 2 and prior.level1.sigma <= 0.5 / (1.0 + (vj - 1) * prior.level0.sigma / state.d)
    else:
        holds = None
    return ElicitationReport(within, across, new, holds)
