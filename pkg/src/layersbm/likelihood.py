"""Collapsed beta-binomial network likelihood over node groups.

With independent beta(a, b) priors on the block edge probabilities, the
marginal likelihood of the network given an allocation vector factorizes
over unordered group pairs into beta-function ratios of edge / non-edge
counts.  This module maintains those counts incrementally under node moves
and exposes the closed-form single-node likelihood ratios the collapsed
Gibbs sampler needs, plus per-dyad pointwise log likelihoods for WAIC.

Because the counts are integers, all beta functions are evaluated through
cached gammaln tables, which keeps the sampler's inner loop table-driven.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

__all__ = ["BlockCounts", "induced_counts", "dyad_log_probs", "pointwise_dyad_loglik"]


class _GammalnTables:
    """gammaln(a + k), gammaln(b + k), gammaln(a + b + k) for integer k."""

    def __init__(self, a: float, b: float, max_count: int):
        self._a0, self._b0 = a, b
        self.top = -1
        self.grow(max_count)
        self.log_beta_prior = self.a[0] + self.b[0] - self.ab[0]

    def grow(self, max_count: int):
        if max_count <= self.top:
            return
        ks = np.arange(max_count + 1, dtype=np.float64)
        self.a = gammaln(self._a0 + ks)
        self.b = gammaln(self._b0 + ks)
        self.ab = gammaln(self._a0 + self._b0 + ks)
        self.top = max_count

    def log_beta(self, m, mbar):
        """log B(a + m, b + mbar) elementwise for integer arrays."""
        tot = np.asarray(m) + np.asarray(mbar)
        if tot.size and int(tot.max()) > self.top:
            self.grow(int(tot.max()) * 2)
        return self.a[m] + self.b[mbar] - self.ab[tot]


class BlockCounts:
    """Edge / non-edge tallies between group pairs, with O(H) node moves.

    ``m[h, h']`` counts edges between groups h and h' (within-group dyads
    once); ``mbar`` likewise for non-edges.  Both stay symmetric under any
    sequence of add/remove operations and always match a from-scratch
    recount of the current allocation.
    """

    def __init__(self, num_groups: int, a: float = 1.0, b: float = 1.0, max_dyads: int | None = None):
        if a <= 0 or b <= 0:
            raise ValueError("beta hyperparameters a, b must be positive")
        self.a = float(a)
        self.b = float(b)
        h = int(num_groups)
        self.m = np.zeros((h, h), dtype=np.int64)
        self.mbar = np.zeros((h, h), dtype=np.int64)
        self._tables = None
        self._max_dyads = max_dyads

    @property
    def num_groups(self) -> int:
        return self.m.shape[0]

    def _get_tables(self) -> _GammalnTables:
        if self._tables is None:
            top = self._max_dyads
            if top is None:
                top = int(max(self.m.max(initial=0) + self.mbar.max(initial=0), 1))
            self._tables = _GammalnTables(self.a, self.b, top)
        return self._tables

    def attach_tables(self, other: "BlockCounts"):
        """Share gammaln tables with another instance (same a, b)."""
        if (other.a, other.b) != (self.a, self.b):
            raise ValueError("can only share tables between counts with equal (a, b)")
        self._tables = other._get_tables()

    def copy(self) -> "BlockCounts":
        out = BlockCounts(self.num_groups, self.a, self.b, self._max_dyads)
        out.m = self.m.copy()
        out.mbar = self.mbar.copy()
        out._tables = self._tables
        return out

    # -- incremental maintenance -------------------------------------------

    def append_group(self):
        h = self.num_groups
        self.m = np.pad(self.m, ((0, 1), (0, 1)))
        self.mbar = np.pad(self.mbar, ((0, 1), (0, 1)))
        return h

    def drop_group(self, h: int):
        if self.m[h].any() or self.mbar[h].any():
            raise ValueError(f"cannot drop group {h}: it still has dyad counts")
        keep = np.arange(self.num_groups) != h
        self.m = self.m[np.ix_(keep, keep)]
        self.mbar = self.mbar[np.ix_(keep, keep)]

    def add_node(self, h: int, r, rbar):
        """Account for a node joining group ``h``.

        ``r[h']`` / ``rbar[h']`` are the node's edge / non-edge counts toward
        the current members of every group h' (the node itself excluded).
        """
        r = np.asarray(r, dtype=np.int64)
        rbar = np.asarray(rbar, dtype=np.int64)
        self.m[h, :] += r
        self.m[:, h] += r
        self.m[h, h] -= r[h]
        self.mbar[h, :] += rbar
        self.mbar[:, h] += rbar
        self.mbar[h, h] -= rbar[h]

    def remove_node(self, h: int, r, rbar):
        r = np.asarray(r, dtype=np.int64)
        rbar = np.asarray(rbar, dtype=np.int64)
        self.m[h, :] -= r
        self.m[:, h] -= r
        self.m[h, h] += r[h]
        self.mbar[h, :] -= rbar
        self.mbar[:, h] -= rbar
        self.mbar[h, h] += rbar[h]
        if self.m.min() < 0 or self.mbar.min() < 0:
            raise ValueError("negative block count after node removal; tallies inconsistent")

    # -- likelihood evaluations --------------------------------------------

    def log_marginal_likelihood(self) -> float:
        """Sum over h <= h' of log B(a + m, b + mbar) - log B(a, b)."""
        t = self._get_tables()
        iu = np.triu_indices(self.num_groups)
        vals = t.log_beta(self.m[iu], self.mbar[iu]) - t.log_beta_prior
        return float(vals.sum())

    def log_ratios_for_node(self, r, rbar) -> np.ndarray:
        """Likelihood log-ratios for placing one held-out node in each group.

        Returns an array of length H+1: entry h < H is the closed-form ratio
        for joining existing group h, entry H for opening a new group.  The
        tallies ``r`` / ``rbar`` are against the held-out state, so
        r[h'] + rbar[h'] must equal the current size of group h'.
        """
        r = np.asarray(r, dtype=np.int64)
        rbar = np.asarray(rbar, dtype=np.int64)
        h = self.num_groups
        t = self._get_tables()
        # Candidate-by-group count matrices: row H is the empty new group.
        m_ext = np.vstack([self.m, np.zeros(h, dtype=np.int64)])
        mb_ext = np.vstack([self.mbar, np.zeros(h, dtype=np.int64)])
        base = t.log_beta(m_ext, mb_ext)
        moved = t.log_beta(m_ext + r, mb_ext + rbar)
        return (moved - base).sum(axis=1)

    def log_ratio_for_node(self, r, rbar, candidate: int, group_sizes=None) -> float:
        """Single-candidate version of :meth:`log_ratios_for_node`.

        ``candidate`` may equal the current group count to denote a new group.
        When ``group_sizes`` is given, the tallies are checked against it:
        r + rbar must equal the held-out-state size of every group.
        """
        r = np.asarray(r, dtype=np.int64)
        rbar = np.asarray(rbar, dtype=np.int64)
        if r.shape != (self.num_groups,) or rbar.shape != (self.num_groups,):
            raise ValueError("tally vectors must have one entry per existing group")
        if group_sizes is not None and not np.array_equal(r + rbar, np.asarray(group_sizes)):
            raise ValueError("edge plus non-edge tallies must equal the group sizes")
        if not 0 <= candidate <= self.num_groups:
            raise ValueError(f"candidate group {candidate} out of range")
        return float(self.log_ratios_for_node(r, rbar)[candidate])


def induced_counts(net, z, a: float = 1.0, b: float = 1.0) -> BlockCounts:
    """From-scratch edge / non-edge tallies for allocation vector ``z``."""
    z = np.asarray(z, dtype=np.int64)
    v = net.num_nodes
    if z.shape != (v,):
        raise ValueError(f"allocation vector has length {z.shape}, expected ({v},)")
    num_groups = int(z.max()) + 1 if v else 0
    counts = BlockCounts(num_groups, a, b, max_dyads=v * (v - 1) // 2)
    onehot = (z[:, None] == np.arange(num_groups)[None, :]).astype(np.int64)
    adj = net.adjacency.astype(np.int64)
    edge_block = onehot.T @ adj @ onehot
    sizes = onehot.sum(axis=0)
    dyads = np.outer(sizes, sizes)
    np.fill_diagonal(dyads, sizes * (sizes - 1))
    counts.m = np.triu(edge_block // np.where(np.eye(num_groups, dtype=bool), 2, 1), 0)
    counts.m = counts.m + np.triu(counts.m, 1).T
    counts.mbar = dyads // np.where(np.eye(num_groups, dtype=bool), 2, 1) - counts.m
    return counts


def dyad_log_probs(net, z, a: float = 1.0, b: float = 1.0) -> np.ndarray:
    """Pointwise log likelihood of every dyad, plug-in under allocation ``z``.

    The plug-in edge probability for a dyad in block (h, h') is the beta
    posterior mean (a + m) / (a + b + m + mbar) with counts from the full
    data, the dyad itself included (a leave-one-out variant would drop the
    dyad from its own counts; the pure plug-in keeps all dyads on the same
    footing).  Dyads are ordered (v, u) with v > u, matching
    ``numpy.tril_indices(V, -1)``.
    """
    counts = induced_counts(net, z, a, b)
    p_edge = (a + counts.m) / (a + b + counts.m + counts.mbar)
    vi, ui = np.tril_indices(net.num_nodes, -1)
    p = p_edge[z[vi], z[ui]]
    y = net.adjacency[vi, ui]
    return np.where(y, np.log(p), np.log1p(-p))


def pointwise_dyad_loglik(net, z, v: int, u: int, a: float = 1.0, b: float = 1.0) -> float:
    """Plug-in log likelihood of the single dyad (v, u) under allocation ``z``."""
    if v == u:
        raise ValueError("a dyad needs two distinct nodes")
    counts = induced_counts(net, z, a, b)
    m = counts.m[z[v], z[u]]
    mbar = counts.mbar[z[v], z[u]]
    p = (a + m) / (a + b + m + mbar)
    return float(np.log(p) if net.adjacency[v, u] else np.log1p(-p))
