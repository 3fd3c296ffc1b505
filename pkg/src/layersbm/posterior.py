"""Posterior summaries of sampled partitions.

Point estimation and uncertainty quantification live in partition space:
pairwise co-clustering frequencies, the variation-of-information metric, the
minimum-expected-VI point estimate over the sampled partitions (with an
optional greedy refinement), a credible ball around it, and WAIC over
per-dyad pointwise likelihoods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "similarity",
    "vi_distance",
    "expected_vi",
    "vi_surrogate",
    "min_vi_estimate",
    "PartitionSummary",
    "waic",
    "similarity_to_pgm",
]


def _sample_matrix(trace_or_samples) -> np.ndarray:
    z = getattr(trace_or_samples, "z", trace_or_samples)
    z = np.asarray(z)
    if z.ndim == 1:
        z = z[None, :]
    if z.ndim != 2 or z.shape[0] == 0:
        raise ValueError("need at least one retained sample")
    return z


def similarity(trace_or_samples) -> np.ndarray:
    """Co-clustering frequency matrix: fraction of samples with z_v == z_u."""
    z = _sample_matrix(trace_or_samples)
    s, v = z.shape
    acc = np.zeros((v, v), dtype=np.float64)
    for row in z:
        acc += row[:, None] == row[None, :]
    return acc / s


def vi_distance(za, zb) -> float:
    """Variation of information between two partitions, in bits."""
    za = np.asarray(za)
    zb = np.asarray(zb)
    if za.shape != zb.shape or za.ndim != 1:
        raise ValueError("partitions must be 1-d vectors of equal length")
    n = za.size
    _, ia = np.unique(za, return_inverse=True)
    _, ib = np.unique(zb, return_inverse=True)
    ka, kb = ia.max() + 1, ib.max() + 1
    joint = np.bincount(ia * kb + ib, minlength=ka * kb).reshape(ka, kb) / n
    pa = joint.sum(axis=1)
    pb = joint.sum(axis=0)
    rows, cols = np.nonzero(joint)
    cell = joint[rows, cols]
    terms = cell * (np.log2(pa[rows]) + np.log2(pb[cols]) - 2.0 * np.log2(cell))
    return float(max(terms.sum(), 0.0))


def expected_vi(z, samples) -> float:
    """Mean VI distance from ``z`` to every sampled partition."""
    samples = _sample_matrix(samples)
    return float(np.mean([vi_distance(z, row) for row in samples]))


def vi_surrogate(z, sim: np.ndarray) -> float:
    """Similarity-matrix surrogate of the expected VI of candidate ``z``.

    Swaps expectations of logs for logs of expectations in the node-wise VI
    decomposition, leaving only the co-clustering matrix; this is the
    standard objective minimized when searching for the VI point estimate.
    """
    z = np.asarray(z)
    eq = z[:, None] == z[None, :]
    own = eq.sum(axis=1).astype(float)
    exp_size = sim.sum(axis=1)
    overlap = (sim * eq).sum(axis=1)
    return float(np.mean(np.log2(own) + np.log2(exp_size) - 2.0 * np.log2(overlap)))


def _dedupe_keep_order(z: np.ndarray):
    seen = {}
    keep = []
    for i, row in enumerate(z):
        key = row.tobytes()
        if key not in seen:
            seen[key] = i
            keep.append(i)
    return z[keep]


def _greedy_refine(z_hat, objective, max_sweeps: int = 5):
    """Single-node moves to any existing or fresh label, steepest descent."""
    z = np.asarray(z_hat).copy()
    best = objective(z)
    for _ in range(max_sweeps):
        improved = False
        for v in range(z.size):
            labels = np.unique(z)
            candidates = list(labels[labels != z[v]]) + [labels.max() + 1]
            for lab in candidates:
                trial = z.copy()
                trial[v] = lab
                val = objective(trial)
                if val < best - 1e-12:
                    z, best = trial, val
                    improved = True
        if not improved:
            break
    _, z = np.unique(z, return_inverse=True)
    return z, best


@dataclass
class PartitionSummary:
    """Point estimate with a credible ball and cluster-count posteriors."""

    z_hat: np.ndarray
    h_hat: int
    ball_radius: float
    z_ball: np.ndarray
    credible_level: float
    h_median: float
    h_quartiles: tuple
    objective: float
    vi_to_reference: float | None = None
    expected_vi_to_reference: float | None = None


def min_vi_estimate(
    sim: np.ndarray,
    candidates,
    alpha: float = 0.05,
    method: str = "surrogate",
    refine: bool = False,
    reference=None,
) -> PartitionSummary:
    """VI point estimate over the sampled partitions, plus a credible ball.

    The estimate minimizes either the similarity-matrix surrogate
    (``method="surrogate"``, default) or the exact mean VI to all samples
    (``method="exact"``, quadratic in the sample count) over the candidate
    set, ties broken by first occurrence; ``refine=True`` follows up with
    greedy single-node moves.  The credible ball is the smallest VI radius
    around the estimate holding at least ``1 - alpha`` of the samples;
    ``z_ball`` is a covered sample at that maximal distance.
    """
    z = _sample_matrix(candidates)
    uniq = _dedupe_keep_order(z)
    if method == "surrogate":
        objective = lambda cand: vi_surrogate(cand, sim)
    elif method == "exact":
        objective = lambda cand: expected_vi(cand, z)
    else:
        raise ValueError(f"unknown method {method!r}")
    values = [objective(row) for row in uniq]
    best_idx = int(np.argmin(values))
    z_hat, best = uniq[best_idx], values[best_idx]
    if refine:
        z_hat, best = _greedy_refine(z_hat, objective)
    _, z_hat = np.unique(z_hat, return_inverse=True)

    dists = np.array([vi_distance(z_hat, row) for row in z])
    order = np.argsort(dists, kind="stable")
    cover = max(int(np.ceil((1.0 - alpha) * len(dists))), 1)
    eps_idx = order[cover - 1]
    radius = float(dists[eps_idx])
    z_ball = z[eps_idx]

    h_values = z.max(axis=1) + 1
    summary = PartitionSummary(
        z_hat=z_hat,
        h_hat=int(z_hat.max()) + 1,
        ball_radius=radius,
        z_ball=np.asarray(z_ball),
        credible_level=1.0 - alpha,
        h_median=float(np.median(h_values)),
        h_quartiles=(float(np.percentile(h_values, 25)), float(np.percentile(h_values, 75))),
        objective=float(best),
    )
    if reference is not None:
        summary.vi_to_reference = vi_distance(z_hat, reference)
        summary.expected_vi_to_reference = expected_vi(reference, z)
    return summary


def waic(trace, net, a: float = 1.0, b: float = 1.0) -> dict:
    """WAIC over dyad-level pointwise likelihoods.

    Per retained sample, each dyad's likelihood is the plug-in beta posterior
    mean of its block probability (the dyad included in its own counts).
    Returns the criterion together with the effective-parameter and lppd
    terms; the penalty uses the population variance across samples, so
    duplicating the trace leaves the value unchanged.
    """
    z = _sample_matrix(trace)
    s, v = z.shape
    if s < 1:
        raise ValueError("need at least one retained sample")
    vi, ui = np.tril_indices(v, -1)
    y = net.adjacency[vi, ui]
    n_dyads = vi.size
    sum_p = np.zeros(n_dyads)
    sum_lp = np.zeros(n_dyads)
    sum_lp2 = np.zeros(n_dyads)
    for row in z:
        big_h = int(row.max()) + 1
        lo = np.minimum(row[vi], row[ui]).astype(np.int64)
        hi = np.maximum(row[vi], row[ui]).astype(np.int64)
        key = lo * big_h + hi
        edges = np.bincount(key[y], minlength=big_h * big_h)
        totals = np.bincount(key, minlength=big_h * big_h)
        p = (a + edges[key]) / (a + b + totals[key])
        lp = np.where(y, np.log(p), np.log1p(-p))
        sum_p += np.where(y, p, 1.0 - p)
        sum_lp += lp
        sum_lp2 += lp * lp
    lppd = float(np.log(sum_p / s).sum())
    p_waic = float((sum_lp2 / s - (sum_lp / s) ** 2).sum())
    return {"waic": -2.0 * (lppd - p_waic), "lppd": lppd, "p_waic": p_waic}


def similarity_to_pgm(sim: np.ndarray, order=None, levels: int = 255) -> str:
    """Plain-text grayscale image of the similarity matrix (dark = likely).

    ``order`` reorders nodes (typically by the point estimate) before
    rendering; returns the PGM file content.
    """
    c = np.asarray(sim)
    if order is not None:
        idx = np.asarray(order)
        c = c[np.ix_(idx, idx)]
    gray = np.rint((1.0 - c) * levels).astype(int)
    v = c.shape[0]
    lines = ["P2", f"{v} {v}", str(levels)]
    lines.extend(" ".join(str(g) for g in row) for row in gray)
    return "\n".join(lines) + "\n"
