"""Compiled inner loop for the collapsed Gibbs sampler.

The reference sweep in :mod:`layersbm.sampler` is a few dozen small numpy
calls per node; at ten thousand sweeps over eighty nodes the interpreter
overhead dominates.  This module holds a numba translation of exactly the
same update, operating on flat capacity-``V`` arrays.  It draws nothing
itself: the caller hands it the per-sweep vector of uniforms from the chain
generator, so reference and compiled paths consume the same stream and must
produce bit-identical traces (asserted in the test suite).

Only the closed-form Dirichlet / stable priors run here; generic kernels
stay on the reference path.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


__all__ = ["HAVE_NUMBA", "GibbsEngine"]

KIND_DP = 0
KIND_NSP = 1


@njit(cache=True)
def _gibbs_sweep(
    order,
    uniforms,
    prior_only,
    kind,
    p1,
    p0,
    z,
    w,
    layer_of,
    layer_start,
    indptr,
    indices,
    sub_size,
    sub_profile,
    n_sub,
    ell,
    nmat,
    ell_col,
    prof_size,
    layer_count,
    scal,
    m,
    mbar,
    gl_a,
    gl_b,
    gl_ab,
    r,
    rbar,
    loglik,
    logp,
):
    d = int(layer_count.shape[0])
    for t in range(order.shape[0]):
        v = int(order[t])
        u = uniforms[t]
        j = int(layer_of[v])
        hold = int(z[v])
        tau_old = int(w[v])
        big_h = int(scal[0])

        # tallies of v against each profile, v excluded
        for h in range(big_h):
            r[h] = 0
        for e in range(indptr[v], indptr[v + 1]):
            r[z[indices[e]]] += 1
        for h in range(big_h):
            rbar[h] = prof_size[h] - r[h]
        rbar[hold] -= 1

        # drop v from the dyad counts
        for h in range(big_h):
            m[hold, h] -= r[h]
            m[h, hold] -= r[h]
            mbar[hold, h] -= rbar[h]
            mbar[h, hold] -= rbar[h]
        m[hold, hold] += r[hold]
        mbar[hold, hold] += rbar[hold]

        # detach v from the franchise state, compacting labels
        layer_count[j] -= 1
        nmat[j, hold] -= 1
        prof_size[hold] -= 1
        sub_size[j, tau_old] -= 1
        if sub_size[j, tau_old] == 0:
            last = int(n_sub[j])
            for tt in range(tau_old, last - 1):
                sub_size[j, tt] = sub_size[j, tt + 1]
                sub_profile[j, tt] = sub_profile[j, tt + 1]
            n_sub[j] = last - 1
            for vv in range(layer_start[j], layer_start[j + 1]):
                if w[vv] > tau_old:
                    w[vv] -= 1
            ell[j, hold] -= 1
            ell_col[hold] -= 1
            scal[1] -= 1
            if ell_col[hold] == 0:
                for h in range(hold, big_h - 1):
                    ell_col[h] = ell_col[h + 1]
                    prof_size[h] = prof_size[h + 1]
                    r[h] = r[h + 1]
                    rbar[h] = rbar[h + 1]
                    for jj in range(d):
                        ell[jj, h] = ell[jj, h + 1]
                        nmat[jj, h] = nmat[jj, h + 1]
                for jj in range(d):
                    for tt in range(n_sub[jj]):
                        if sub_profile[jj, tt] > hold:
                            sub_profile[jj, tt] -= 1
                for vv in range(z.shape[0]):
                    if z[vv] > hold:
                        z[vv] -= 1
                for h in range(hold, big_h - 1):
                    for h2 in range(big_h):
                        m[h, h2] = m[h + 1, h2]
                        mbar[h, h2] = mbar[h + 1, h2]
                for h2 in range(hold, big_h - 1):
                    for h in range(big_h - 1):
                        m[h, h2] = m[h, h2 + 1]
                        mbar[h, h2] = mbar[h, h2 + 1]
                big_h -= 1
                scal[0] = big_h
                for h in range(big_h + 1):
                    m[big_h, h] = 0
                    m[h, big_h] = 0
                    mbar[big_h, h] = 0
                    mbar[h, big_h] = 0
        z[v] = -1
        w[v] = -1

        # collapsed likelihood log-ratio per candidate profile (big_h = new)
        if prior_only:
            for h in range(big_h + 1):
                loglik[h] = 0.0
        else:
            for hc in range(big_h + 1):
                acc = 0.0
                for h2 in range(big_h):
                    if hc < big_h:
                        mm = m[hc, h2]
                        mb = mbar[hc, h2]
                    else:
                        mm = 0
                        mb = 0
                    acc += (
                        gl_a[mm + r[h2]]
                        + gl_b[mb + rbar[h2]]
                        - gl_ab[mm + mb + r[h2] + rbar[h2]]
                        - gl_a[mm]
                        - gl_b[mb]
                        + gl_ab[mm + mb]
                    )
                loglik[hc] = acc

        # prior factors over the sparse candidate list
        nsub = int(n_sub[j])
        c = float(layer_count[j])
        ncand = nsub + big_h + 1
        if kind == KIND_DP:
            den1 = np.log(p1 + c)
            for tt in range(nsub):
                logp[tt] = np.log(float(sub_size[j, tt])) - den1 + loglik[sub_profile[j, tt]]
            log_new1 = np.log(p1) - den1
            den0 = np.log(p0 + float(scal[1]))
            for h in range(big_h):
                logp[nsub + h] = log_new1 + np.log(float(ell_col[h])) - den0 + loglik[h]
            logp[nsub + big_h] = log_new1 + np.log(p0) - den0 + loglik[big_h]
        else:
            if c > 0.0:
                lc = np.log(c)
                for tt in range(nsub):
                    logp[tt] = np.log(float(sub_size[j, tt]) - p1) - lc + loglik[sub_profile[j, tt]]
                log_new1 = np.log(nsub * p1) - lc
            else:
                log_new1 = 0.0
            if big_h > 0:
                le = np.log(float(scal[1]))
                for h in range(big_h):
                    logp[nsub + h] = log_new1 + np.log(float(ell_col[h]) - p0) - le + loglik[h]
                logp[nsub + big_h] = log_new1 + np.log(big_h * p0) - le + loglik[big_h]
            else:
                logp[nsub + big_h] = log_new1 + loglik[big_h]

        # normalize and draw with the supplied uniform
        mx = logp[0]
        for i in range(1, ncand):
            if logp[i] > mx:
                mx = logp[i]
        total = 0.0
        for i in range(ncand):
            logp[i] = np.exp(logp[i] - mx)
            total += logp[i]
        target = u * total
        acc = 0.0
        idx = ncand - 1
        for i in range(ncand):
            acc += logp[i]
            if target < acc:
                idx = i
                break

        if idx < nsub:
            tau = idx
            hnew = int(sub_profile[j, idx])
        else:
            tau = nsub
            hnew = idx - nsub
        if hnew == big_h:
            r[big_h] = 0
            rbar[big_h] = 0
            ell_col[big_h] = 0
            prof_size[big_h] = 0
            for jj in range(d):
                ell[jj, big_h] = 0
                nmat[jj, big_h] = 0
            big_h += 1
            scal[0] = big_h

        # add v back to counts and state
        for h in range(big_h):
            m[hnew, h] += r[h]
            m[h, hnew] += r[h]
            mbar[hnew, h] += rbar[h]
            mbar[h, hnew] += rbar[h]
        m[hnew, hnew] -= r[hnew]
        mbar[hnew, hnew] -= rbar[hnew]
        if tau == n_sub[j]:
            sub_size[j, tau] = 1
            sub_profile[j, tau] = hnew
            n_sub[j] += 1
            ell[j, hnew] += 1
            ell_col[hnew] += 1
            scal[1] += 1
        else:
            sub_size[j, tau] += 1
        nmat[j, hnew] += 1
        prof_size[hnew] += 1
        layer_count[j] += 1
        z[v] = hnew
        w[v] = tau


class GibbsEngine:
    """Flat-array mirror of (FranchiseState, BlockCounts) for compiled sweeps."""

    def __init__(self, net, state, counts, kind: int):
        v = net.num_nodes
        d = net.num_layers
        cap = v + 1
        self.kind = kind
        self.z = state.z.astype(np.int64).copy()
        self.w = state.w.astype(np.int64).copy()
        self.layer_of = net.layer_of.astype(np.int64)
        self.layer_start = np.concatenate([[0], np.cumsum(net.layer_sizes)]).astype(np.int64)
        csr_ptr = [0]
        csr_idx = []
        for u in range(v):
            nb = np.flatnonzero(net.adjacency[u])
            csr_idx.extend(nb.tolist())
            csr_ptr.append(len(csr_idx))
        self.indptr = np.asarray(csr_ptr, dtype=np.int64)
        self.indices = np.asarray(csr_idx, dtype=np.int64)

        self.sub_size = np.zeros((d, cap), dtype=np.int64)
        self.sub_profile = np.zeros((d, cap), dtype=np.int64)
        self.n_sub = np.zeros(d, dtype=np.int64)
        self.ell = np.zeros((d, cap), dtype=np.int64)
        self.nmat = np.zeros((d, cap), dtype=np.int64)
        self.ell_col = np.zeros(cap, dtype=np.int64)
        self.prof_size = np.zeros(cap, dtype=np.int64)
        self.layer_count = state.layer_count.astype(np.int64).copy()
        big_h = state.num_profiles
        self.scal = np.array([big_h, state.ell_total], dtype=np.int64)
        for j in range(d):
            k = state.ell_row(j)
            self.n_sub[j] = k
            self.sub_size[j, :k] = state.sub_size[j]
            self.sub_profile[j, :k] = state.sub_profile[j]
        self.ell[:, :big_h] = state.ell
        self.nmat[:, :big_h] = state.n
        self.ell_col[:big_h] = state.ell_col
        self.prof_size[:big_h] = state.profile_sizes

        self.m = np.zeros((cap, cap), dtype=np.int64)
        self.mbar = np.zeros((cap, cap), dtype=np.int64)
        self.m[:big_h, :big_h] = counts.m
        self.mbar[:big_h, :big_h] = counts.mbar
        tables = counts._get_tables()
        tables.grow(v * (v - 1) // 2)
        self.gl_a, self.gl_b, self.gl_ab = tables.a, tables.b, tables.ab

        self._r = np.zeros(cap, dtype=np.int64)
        self._rbar = np.zeros(cap, dtype=np.int64)
        self._loglik = np.zeros(cap, dtype=np.float64)
        self._logp = np.zeros(2 * cap + 1, dtype=np.float64)

    def sweep(self, order, uniforms, prior_only: bool, p1: float, p0: float):
        _gibbs_sweep(
            np.asarray(order, dtype=np.int64),
            uniforms,
            prior_only,
            self.kind,
            p1,
            p0,
            self.z,
            self.w,
            self.layer_of,
            self.layer_start,
            self.indptr,
            self.indices,
            self.sub_size,
            self.sub_profile,
            self.n_sub,
            self.ell,
            self.nmat,
            self.ell_col,
            self.prof_size,
            self.layer_count,
            self.scal,
            self.m,
            self.mbar,
            self.gl_a,
            self.gl_b,
            self.gl_ab,
            self._r,
            self._rbar,
            self._loglik,
            self._logp,
        )

    @property
    def num_profiles(self) -> int:
        return int(self.scal[0])

    @property
    def ell_total(self) -> int:
        return int(self.scal[1])

    def log_marginal_likelihood(self) -> float:
        h = self.num_profiles
        iu = np.triu_indices(h)
        mm = self.m[:h, :h][iu]
        mb = self.mbar[:h, :h][iu]
        base = self.gl_a[0] + self.gl_b[0] - self.gl_ab[0]
        vals = self.gl_a[mm] + self.gl_b[mb] - self.gl_ab[mm + mb] - base
        return float(vals.sum())
