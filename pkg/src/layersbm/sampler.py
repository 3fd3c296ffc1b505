"""Collapsed Gibbs sampler over (profile, subgroup) allocations.

One sweep removes each node in turn, scores every admissible reallocation by
prior ratio times collapsed-likelihood ratio, samples from the normalized
table, and reinserts.  The (profile x subgroup) table is highly sparse: each
existing-subgroup column has a single admissible profile, so the sampler
enumerates existing subgroups plus the new-subgroup column instead of the
dense table.  A dense-table path (used automatically for generic kernels)
walks the same candidate list in the same order and consumes the identical
random stream, so the two are exchangeable draw for draw.

Optional gamma hyperpriors on the two Dirichlet concentrations are updated
once per sweep through a conjugate auxiliary-variable step.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import HAVE_NUMBA, KIND_DP, KIND_NSP, GibbsEngine
from .eppf import DirichletKernel, StableKernel
from .franchise import FranchiseState, canonical_labels, joint_conditional
from .likelihood import induced_counts
from .priors import GammaHyperprior, PriorSpec

__all__ = ["SamplerConfig", "SampleTrace", "run_chain", "run_chains", "hyperprior_step"]


@dataclass
class SamplerConfig:
    """Everything a chain needs besides the network itself.

    ``init`` is one of ``"singletons"`` (default), ``"one-block"``, or a
    ``(z, w)`` pair of warm-start vectors.  ``prior_only`` drops the
    likelihood factor so the chain targets the partition prior, which is how
    the sampler is validated against exact enumeration.  ``dense_tables``
    forces the dense-table reference path.
    """

    prior: PriorSpec
    a: float = 1.0
    b: float = 1.0
    n_iter: int = 10_000
    n_burn: int = 2_000
    thin: int = 1
    seed: int = 0
    init: object = "singletons"
    prior_only: bool = False
    random_scan: bool = False
    dense_tables: bool = False
    debug_checks: bool = False

    def __post_init__(self):
        if self.n_iter < 1 or not 0 <= self.n_burn < self.n_iter:
            raise ValueError("need 0 <= n_burn < n_iter")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.a <= 0 or self.b <= 0:
            raise ValueError("beta hyperparameters must be positive")

    def describe(self) -> dict:
        prior = {"family": self.prior.family}
        if self.prior.family == "dp":
            prior.update(theta=self.prior.level1.theta, theta0=self.prior.level0.theta)
            if self.prior.hyper:
                h = self.prior.hyper
                prior.update(hyper=[h.alpha, h.beta, h.alpha0, h.beta0])
        elif self.prior.family == "nsp":
            prior.update(sigma=self.prior.level1.sigma, sigma0=self.prior.level0.sigma)
        return {
            "prior": prior,
            "a": self.a,
            "b": self.b,
            "n_iter": self.n_iter,
            "n_burn": self.n_burn,
            "thin": self.thin,
            "seed": self.seed,
            "init": self.init if isinstance(self.init, str) else "warm-start",
            "prior_only": self.prior_only,
            "random_scan": self.random_scan,
        }


@dataclass
class SampleTrace:
    """Retained sweeps of one chain, canonical labels throughout."""

    sweeps: np.ndarray
    z: np.ndarray
    w: np.ndarray
    log_likelihood: np.ndarray
    theta: np.ndarray
    theta0: np.ndarray
    layer_of: np.ndarray
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def __len__(self):
        return self.z.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.z.shape[1]

    @property
    def num_groups(self) -> np.ndarray:
        """Number of occupied profiles per retained sweep."""
        return self.z.max(axis=1) + 1

    @staticmethod
    def merge(traces) -> "SampleTrace":
        traces = list(traces)
        first = traces[0]
        return SampleTrace(
            sweeps=np.concatenate([t.sweeps for t in traces]),
            z=np.vstack([t.z for t in traces]),
            w=np.vstack([t.w for t in traces]),
            log_likelihood=np.concatenate([t.log_likelihood for t in traces]),
            theta=np.concatenate([t.theta for t in traces]),
            theta0=np.concatenate([t.theta0 for t in traces]),
            layer_of=first.layer_of,
            config=first.config,
            wall_time=sum(t.wall_time for t in traces),
        )


def _initial_state(net, cfg) -> FranchiseState:
    if isinstance(cfg.init, str):
        if cfg.init == "singletons":
            return FranchiseState.singletons(net.layer_of)
        if cfg.init == "one-block":
            return FranchiseState.one_block(net.layer_of)
        raise ValueError(f"unknown init {cfg.init!r}")
    z, w = cfg.init
    state = FranchiseState.from_assignments(net.layer_of, z, w)
    if np.any(state.z < 0):
        raise ValueError("warm-start must allocate every node")
    return state


def _current_params(prior: PriorSpec):
    if prior.family == "dp":
        return prior.level1.theta, prior.level0.theta
    if prior.family == "nsp":
        return prior.level1.sigma, prior.level0.sigma
    return math.nan, math.nan


def _sparse_log_prior(state, j, prior):
    """Log prior over the sparse candidate list, plus each candidate's profile.

    Candidates are the existing subgroups of layer j in label order followed
    by (new subgroup, profile h) for h = 0..H.  Returns (log_prior, profiles).
    """
    level1, level0 = prior.level1, prior.level0
    sizes = np.asarray(state.sub_size[j], dtype=np.float64)
    profs = np.asarray(state.sub_profile[j], dtype=np.int64)
    big_h = state.num_profiles
    c = float(state.layer_count[j])
    ell_col = state.ell_col.astype(np.float64)
    ell_tot = float(state.ell_total)
    if isinstance(level1, DirichletKernel):
        theta = level1.theta
        log_sub = np.log(sizes) - math.log(theta + c)
        log_new1 = math.log(theta) - math.log(theta + c)
    else:
        sigma = level1.sigma
        log_sub = np.log(sizes - sigma) - math.log(c) if sizes.size else sizes
        log_new1 = math.log(sizes.size * sigma) - math.log(c) if sizes.size else 0.0
    if isinstance(level0, DirichletKernel):
        theta0 = level0.theta
        lvl0 = np.empty(big_h + 1)
        lvl0[:big_h] = np.log(ell_col) - math.log(theta0 + ell_tot)
        lvl0[big_h] = math.log(theta0) - math.log(theta0 + ell_tot)
    else:
        sigma0 = level0.sigma
        lvl0 = np.empty(big_h + 1)
        if big_h:
            lvl0[:big_h] = np.log(ell_col - sigma0) - math.log(ell_tot)
            lvl0[big_h] = math.log(big_h * sigma0) - math.log(ell_tot)
        else:
            lvl0[0] = 0.0
    log_prior = np.concatenate([log_sub, log_new1 + lvl0])
    profiles = np.concatenate([profs, np.arange(big_h + 1)])
    return log_prior, profiles


def _dense_log_prior(state, j, prior):
    """Same candidate list and order, read off the dense table."""
    table = joint_conditional(state, j, prior)
    profs = np.asarray(state.sub_profile[j], dtype=np.int64)
    num_sub = table.shape[1] - 1
    existing = table[profs, np.arange(num_sub)] if num_sub else np.empty(0)
    with np.errstate(divide="ignore"):
        log_prior = np.log(np.concatenate([existing, table[:, num_sub]]))
    profiles = np.concatenate([profs, np.arange(table.shape[0])])
    return log_prior, profiles


def _update_node(v, state, counts, neighbors, prior, rng, cfg):
    j = int(state.layer_of[v])
    h_old = int(state.z[v])
    big_h = state.num_profiles
    zn = state.z[neighbors[v]]
    r = np.bincount(zn, minlength=big_h)
    sizes = state.profile_sizes.copy()
    sizes[h_old] -= 1
    rbar = sizes - r
    counts.remove_node(h_old, r, rbar)
    _, _, dead = state.detach_node(v)
    if dead >= 0:
        counts.drop_group(dead)
        r = np.delete(r, dead)
        rbar = np.delete(rbar, dead)

    if cfg.dense_tables or prior.family == "generic":
        log_prior, profiles = _dense_log_prior(state, j, prior)
    else:
        log_prior, profiles = _sparse_log_prior(state, j, prior)
    if cfg.prior_only:
        logp = log_prior
    else:
        logp = log_prior + counts.log_ratios_for_node(r, rbar)[profiles]

    logp = logp - logp.max()
    cdf = np.cumsum(np.exp(logp))
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    idx = min(idx, logp.size - 1)

    num_sub = state.ell_row(j)
    if idx < num_sub:
        tau, h = idx, int(profiles[idx])
    else:
        tau, h = num_sub, int(profiles[idx])
    if h == state.num_profiles:
        counts.append_group()
        r = np.append(r, 0)
        rbar = np.append(rbar, 0)
    counts.add_node(h, r, rbar)
    state.insert_node(v, h, tau)


def hyperprior_step(state: FranchiseState, theta: float, theta0: float, hyper: GammaHyperprior, rng):
    """Conjugate update of the two Dirichlet concentrations.

    Draws the beta auxiliary variables (one for the shared level against the
    total subgroup count, one per layer against the layer size), then samples
    the concentrations from their gamma full conditionals.
    """
    ell_tot = state.ell_total
    big_h = state.num_profiles
    if ell_tot < 1:
        raise ValueError("hyperprior step requires an allocated state")
    eta0 = rng.beta(theta0, ell_tot)
    nu0 = math.log(eta0)
    etas = rng.beta(theta, state.layer_count.astype(np.float64))
    nu = float(np.log(etas).sum())
    new_theta0 = rng.gamma(hyper.alpha0 + big_h, 1.0 / (hyper.beta0 - nu0))
    new_theta = rng.gamma(hyper.alpha + ell_tot, 1.0 / (hyper.beta - nu))
    return new_theta, new_theta0


def run_chain(net, cfg: SamplerConfig) -> SampleTrace:
    """Run one chain of the collapsed Gibbs sampler on a network.

    Deterministic given (network, config, seed).  The compiled engine is
    used for closed-form priors when numba is present; it consumes the same
    random stream as the reference path, so the choice does not change the
    draws.  Returns the retained, thinned, canonically relabeled samples.
    """
    if cfg.prior.hyper is not None and cfg.prior.family != "dp":
        raise ValueError("hyperpriors are only supported for Dirichlet kernels")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    state = _initial_state(net, cfg)
    v_total = net.num_nodes
    counts = induced_counts(net, state.z, cfg.a, cfg.b)
    prior = cfg.prior

    engine = None
    if (
        HAVE_NUMBA
        and prior.family in ("dp", "nsp")
        and not cfg.dense_tables
        and not cfg.debug_checks
    ):
        engine = GibbsEngine(net, state, counts, KIND_DP if prior.family == "dp" else KIND_NSP)
    else:
        neighbors = net.neighbor_lists()

    kept = max(0, (cfg.n_iter - cfg.n_burn) // cfg.thin)
    z_out = np.empty((kept, v_total), dtype=np.int16)
    w_out = np.empty((kept, v_total), dtype=np.int16)
    ll_out = np.empty(kept)
    th_out = np.empty(kept)
    th0_out = np.empty(kept)
    sweep_out = np.empty(kept, dtype=np.int64)

    t_start = time.perf_counter()
    stored = 0
    for sweep in range(1, cfg.n_iter + 1):
        order = rng.permutation(v_total) if cfg.random_scan else np.arange(v_total)
        if engine is not None:
            p1, p0 = _current_params(prior)
            engine.sweep(order, rng.random(v_total), cfg.prior_only, p1, p0)
            source = engine
        else:
            for v in order:
                _update_node(int(v), state, counts, neighbors, prior, rng, cfg)
                if cfg.debug_checks:
                    state.check_consistency()
                    ref = induced_counts(net, state.z, cfg.a, cfg.b)
                    assert np.array_equal(ref.m, counts.m) and np.array_equal(
                        ref.mbar, counts.mbar
                    )
            source = state
        if prior.hyper is not None:
            theta, theta0 = hyperprior_step(
                source, prior.level1.theta, prior.level0.theta, prior.hyper, rng
            )
            prior = prior.with_concentrations(theta, theta0)
        if sweep > cfg.n_burn and (sweep - cfg.n_burn - 1) % cfg.thin == 0 and stored < kept:
            cz, cw = canonical_labels(net.layer_of, source.z, source.w)
            z_out[stored] = cz
            w_out[stored] = cw
            ll_out[stored] = (
                engine.log_marginal_likelihood()
                if engine is not None
                else counts.log_marginal_likelihood()
            )
            th_out[stored], th0_out[stored] = _current_params(prior)
            sweep_out[stored] = sweep
            stored += 1

    return SampleTrace(
        sweeps=sweep_out[:stored],
        z=z_out[:stored],
        w=w_out[:stored],
        log_likelihood=ll_out[:stored],
        theta=th_out[:stored],
        theta0=th0_out[:stored],
        layer_of=net.layer_of.copy(),
        config=cfg.describe(),
        wall_time=time.perf_counter() - t_start,
    )


def chain_seed(master_seed: int, chain: int) -> int:
    """Fixed derivation of per-chain stream seeds from the master seed."""
    return int(np.random.SeedSequence(master_seed, spawn_key=(chain,)).generate_state(1)[0])


def run_chains(net, cfg: SamplerConfig, n_chains: int = 1) -> list:
    """Run independent chains with per-chain streams derived from the seed.

    Chains run concurrently on multi-core machines (process pool) when the
    configuration is picklable; results are identical either way.
    """
    import os
    from dataclasses import replace

    configs = [replace(cfg, seed=chain_seed(cfg.seed, c)) for c in range(n_chains)]
    if n_chains > 1 and (os.cpu_count() or 1) > 1 and cfg.prior.family != "generic":
        try:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=min(n_chains, os.cpu_count())) as pool:
                return list(pool.map(run_chain, [net] * n_chains, configs))
        except (ImportError, OSError, TypeError, AttributeError):
            pass
    return [run_chain(net, chain_cfg) for chain_cfg in configs]
