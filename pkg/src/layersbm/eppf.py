"""Exchangeable partition probability functions (EPPFs) in log space.

An EPPF gives the probability of one specific partition of ``n`` items as a
symmetric function of its block sizes.  Two closed-form families are provided,
the Dirichlet-process family (concentration ``theta``) and the normalized
stable family (stability ``sigma``), plus a generic wrapper around any
user-supplied log-EPPF evaluator.  The hierarchical partition prior evaluates
these at two levels (within-layer subgroups and shared profile labels), and
the urn updates only ever need one-step ratios, so kernels expose both the
full ``log_phi`` and the incremental ``log_ratio_add``.

All arithmetic is in log space via ``gammaln``; no factorials are ever
materialized.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "EppfKernel",
    "DirichletKernel",
    "StableKernel",
    "GenericKernel",
    "NEW_CLUSTER",
    "set_partitions",
    "validate_addition_rule",
]

# Sentinel for "open a new cluster" in log_ratio_add.
NEW_CLUSTER = None


def _as_counts(frequencies) -> np.ndarray:
    freqs = np.asarray(frequencies, dtype=np.int64)
    if freqs.ndim != 1 or freqs.size == 0:
        raise ValueError("frequencies must be a non-empty 1-d collection")
    if np.any(freqs < 1):
        raise ValueError("all cluster frequencies must be >= 1")
    return freqs


class EppfKernel:
    """Base class for EPPF kernels. Immutable value objects; all ops pure."""

    def log_phi(self, frequencies) -> float:
        """Log probability of a specific partition with the given block sizes."""
        raise NotImplementedError

    def log_ratio_add(self, frequencies, cluster=NEW_CLUSTER) -> float:
        """log phi(after adding one item) - log phi(before).

        ``cluster`` is the 0-based index of the block receiving the new item,
        or ``NEW_CLUSTER`` to open a singleton block.  ``frequencies`` may be
        empty when opening the first block.
        """
        freqs = list(frequencies)
        if cluster is NEW_CLUSTER:
            after = freqs + [1]
        else:
            if not 0 <= cluster < len(freqs):
                raise IndexError(f"no cluster {cluster} in a {len(freqs)}-block partition")
            after = list(freqs)
            after[cluster] += 1
        before = 0.0 if not freqs else self.log_phi(freqs)
        return self.log_phi(after) - before


class DirichletKernel(EppfKernel):
    """EPPF of a Dirichlet process with concentration ``theta`` > 0.

    For block sizes n_1..n_K with n = sum n_k:
        phi = theta^K / [theta]_n * prod_k (n_k - 1)!
    where [theta]_n is the ascending factorial Gamma(theta+n)/Gamma(theta).
    """

    def __init__(self, theta: float):
        if not theta > 0:
            raise ValueError(f"theta must be strictly positive, got {theta}")
        self.theta = float(theta)

    def log_phi(self, frequencies) -> float:
        freqs = _as_counts(frequencies)
        n = int(freqs.sum())
        k = freqs.size
        return (
            k * math.log(self.theta)
            - (gammaln(self.theta + n) - gammaln(self.theta))
            + float(gammaln(freqs).sum())
        )

    def log_ratio_add(self, frequencies, cluster=NEW_CLUSTER) -> float:
        freqs = np.asarray(frequencies, dtype=np.int64)
        n = int(freqs.sum())
        if cluster is NEW_CLUSTER:
            return math.log(self.theta) - math.log(self.theta + n)
        if not 0 <= cluster < freqs.size:
            raise IndexError(f"no cluster {cluster} in a {freqs.size}-block partition")
        return math.log(freqs[cluster]) - math.log(self.theta + n)

    def __repr__(self):
        return f"DirichletKernel(theta={self.theta})"


class StableKernel(EppfKernel):
    """EPPF of a normalized stable process with index ``sigma`` in (0, 1).

    For block sizes n_1..n_K with n = sum n_k:
        phi = (K-1)! sigma^(K-1) / (n-1)! * prod_k [1-sigma]_(n_k - 1)
    """

    def __init__(self, sigma: float):
        if not 0.0 < sigma < 1.0:
            raise ValueError(f"sigma must lie strictly in (0, 1), got {sigma}")
        self.sigma = float(sigma)

    def log_phi(self, frequencies) -> float:
        freqs = _as_counts(frequencies)
        n = int(freqs.sum())
        k = freqs.size
        return (
            gammaln(k)
            + (k - 1) * math.log(self.sigma)
            - gammaln(n)
            + float((gammaln(freqs - self.sigma) - gammaln(1.0 - self.sigma)).sum())
        )

    def log_ratio_add(self, frequencies, cluster=NEW_CLUSTER) -> float:
        freqs = np.asarray(frequencies, dtype=np.int64)
        n = int(freqs.sum())
        k = freqs.size
        if cluster is NEW_CLUSTER:
            if k == 0:
                return 0.0  # first block is certain
            return math.log(k * self.sigma) - math.log(n)
        if not 0 <= cluster < k:
            raise IndexError(f"no cluster {cluster} in a {k}-block partition")
        return math.log(freqs[cluster] - self.sigma) - math.log(n)

    def __repr__(self):
        return f"StableKernel(sigma={self.sigma})"


class GenericKernel(EppfKernel):
    """Wrap an arbitrary log-EPPF evaluator.

    ``log_phi_fn`` must accept a sequence of positive block sizes and return
    the log probability mass of one partition with those sizes.  Ratios fall
    back to two evaluations; there is no closed-form shortcut.  Pass
    ``validate=True`` (or call :func:`validate_addition_rule` yourself) to
    check a new evaluator on all partitions of up to six items before use.
    """

    def __init__(
        self,
        log_phi_fn: Callable[[Sequence[int]], float],
        name: str = "generic",
        validate: bool = False,
    ):
        self._log_phi_fn = log_phi_fn
        self.name = name
        if validate:
            validate_addition_rule(self, max_n=6)

    def log_phi(self, frequencies) -> float:
        freqs = _as_counts(frequencies)
        return float(self._log_phi_fn(tuple(int(f) for f in freqs)))

    def __repr__(self):
        return f"GenericKernel({self.name})"


def set_partitions(items: Sequence) -> Iterable[list]:
    """Yield every set partition of ``items`` as a list of blocks.

    Blocks are ordered by first appearance, matching the canonical labeling
    used everywhere else.  Bell(8) = 4140, so exhaustive checks stay cheap
    for n <= 8.
    """
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for partial in set_partitions(rest):
        yield [[first]] + partial
        for i in range(len(partial)):
            yield partial[:i] + [[first] + partial[i]] + partial[i + 1 :]


def validate_addition_rule(kernel: EppfKernel, max_n: int = 6, tol: float = 1e-10) -> float:
    """Check Kolmogorov consistency of a single EPPF by enumeration.

    For every partition shape with n <= max_n items, verifies
        phi(n_1..n_K) = sum_k phi(..n_k+1..) + phi(n_1..n_K, 1)
    and that the EPPF sums to one over all set partitions of [n].
    Returns the maximum absolute error; raises ValueError beyond ``tol``.
    """
    max_err = 0.0
    for n in range(1, max_n + 1):
        total = 0.0
        for blocks in set_partitions(range(n)):
            sizes = [len(b) for b in blocks]
            p = math.exp(kernel.log_phi(sizes))
            total += p
            extended = math.exp(kernel.log_phi(sizes + [1]))
            for k in range(len(sizes)):
                grown = list(sizes)
                grown[k] += 1
                extended += math.exp(kernel.log_phi(grown))
            max_err = max(max_err, abs(p - extended))
        max_err = max(max_err, abs(total - 1.0))
    if max_err > tol:
        raise ValueError(
            f"EPPF evaluator violates the addition rule / normalization "
            f"(max abs error {max_err:.3e} > {tol:.1e})"
        )
    return max_err
