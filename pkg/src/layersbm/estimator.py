"""Estimator-style front end.

``MultilayerSBM`` wraps the whole pipeline behind the familiar
fit / predict surface: ``fit(X, layers)`` runs the collapsed Gibbs sampler
on an adjacency matrix with per-node layer labels, after which the point
estimate, similarity matrix and summaries are available as attributes, and
``predict`` / ``predict_edge_probabilities`` handle unseen nodes given only
their layers.  Nodes may arrive in any order; they are regrouped by layer
internally and every output is mapped back to the input order.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .network import SupraNetwork
from .posterior import min_vi_estimate, similarity, waic
from .predict import edge_probabilities, predictive_coclustering, sample_augmented_partitions
from .priors import PriorSpec
from .sampler import SamplerConfig, SampleTrace, run_chains

__all__ = ["MultilayerSBM"]


class MultilayerSBM(BaseEstimator):
    """Stochastic block model with a layer-aware hierarchical partition prior.

    Parameters mirror the sampler configuration: ``prior`` selects the
    partition prior family ("hdp", "hnsp", or "hdp-hyper" for gamma
    hyperpriors on the two concentrations), and ``theta`` / ``theta0`` or
    ``sigma`` / ``sigma0`` are its parameters.  ``a`` and ``b`` are the beta
    hyperparameters of the collapsed edge likelihood.

    After ``fit``:

    - ``labels_``: VI point estimate of the node partition (input order);
    - ``n_clusters_``: its number of groups;
    - ``similarity_``: posterior co-clustering matrix (input order);
    - ``summary_``: the full :class:`PartitionSummary`;
    - ``waic_``: WAIC of the fitted model;
    - ``trace_``: merged retained samples.
    """

    def __init__(
        self,
        prior: str = "hdp",
        theta: float = 0.5,
        theta0: float = 4.0,
        sigma: float = 0.2,
        sigma0: float = 0.8,
        hyper_alpha: float = 5.0,
        hyper_beta: float = 10.0,
        hyper_alpha0: float = 12.0,
        hyper_beta0: float = 3.0,
        a: float = 1.0,
        b: float = 1.0,
        n_iter: int = 10_000,
        n_burn: int = 2_000,
        thin: int = 1,
        n_chains: int = 1,
        init: str = "singletons",
        random_scan: bool = False,
        credible_level: float = 0.95,
        random_state: int = 0,
    ):
        self.prior = prior
        self.theta = theta
        self.theta0 = theta0
        self.sigma = sigma
        self.sigma0 = sigma0
        self.hyper_alpha = hyper_alpha
        self.hyper_beta = hyper_beta
        self.hyper_alpha0 = hyper_alpha0
        self.hyper_beta0 = hyper_beta0
        self.a = a
        self.b = b
        self.n_iter = n_iter
        self.n_burn = n_burn
        self.thin = thin
        self.n_chains = n_chains
        self.init = init
        self.random_scan = random_scan
        self.credible_level = credible_level
        self.random_state = random_state

    def _prior_spec(self) -> PriorSpec:
        if self.prior == "hdp":
            return PriorSpec.hdp(self.theta, self.theta0)
        if self.prior == "hnsp":
            return PriorSpec.hnsp(self.sigma, self.sigma0)
        if self.prior == "hdp-hyper":
            return PriorSpec.hdp_hyper(
                self.hyper_alpha, self.hyper_beta, self.hyper_alpha0, self.hyper_beta0
            )
        raise ValueError(f"unknown prior {self.prior!r}; use hdp, hnsp or hdp-hyper")

    def _validate_network(self, X, layers):
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise ValueError("X must be a square adjacency matrix")
        if not np.array_equal(X, X.T):
            raise ValueError("adjacency must be symmetric")
        vals = np.unique(X)
        if not np.all(np.isin(vals, [0, 1])):
            raise ValueError("adjacency must be binary")
        if np.any(np.diag(X) != 0):
            raise ValueError("adjacency must have a zero diagonal")
        layers = np.asarray(layers)
        if layers.shape != (X.shape[0],):
            raise ValueError("layers must hold one label per node")
        labels = list(dict.fromkeys(layers.tolist()))
        layer_idx = np.array([labels.index(lab) for lab in layers], dtype=np.int64)
        order = np.argsort(layer_idx, kind="stable")
        sizes = np.bincount(layer_idx, minlength=len(labels))
        net = SupraNetwork(
            X.astype(bool)[np.ix_(order, order)],
            layer_idx[order],
            sizes,
            tuple(str(i) for i in order),
            tuple(str(lab) for lab in labels),
        )
        return net, order

    def fit(self, X, layers):
        """Sample the posterior for adjacency ``X`` and per-node ``layers``."""
        net, order = self._validate_network(X, layers)
        cfg = SamplerConfig(
            prior=self._prior_spec(),
            a=self.a,
            b=self.b,
            n_iter=self.n_iter,
            n_burn=self.n_burn,
            thin=self.thin,
            seed=self.random_state,
            init=self.init,
            random_scan=self.random_scan,
        )
        trace = SampleTrace.merge(run_chains(net, cfg, self.n_chains))
        sim = similarity(trace)
        summary = min_vi_estimate(sim, trace, alpha=1.0 - self.credible_level)

        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        self.net_ = net
        self.node_order_ = order
        self.trace_ = trace
        self.summary_ = summary
        self.similarity_ = sim[np.ix_(inverse, inverse)]
        self.labels_ = summary.z_hat[inverse]
        self.n_clusters_ = summary.h_hat
        self.waic_ = waic(trace, net, self.a, self.b)["waic"]
        return self

    def _inverse_order(self):
        inverse = np.empty_like(self.node_order_)
        inverse[self.node_order_] = np.arange(self.node_order_.size)
        return inverse

    def predict(self, new_layers):
        """Point-estimate allocations for unseen nodes given their layers.

        Runs the augmented co-clustering estimate over in-sample and new
        nodes jointly and returns the new nodes' groups, labeled consistently
        with the augmented estimate's in-sample part.
        """
        check_is_fitted(self, "trace_")
        labels = [str(lab) for lab in new_layers]
        aug = predictive_coclustering(self.trace_, self.net_, labels, self._prior_spec())
        rng = np.random.default_rng(self.random_state + 1)
        draws = sample_augmented_partitions(
            self.trace_, self.net_, labels, self._prior_spec(), rng
        )
        summary = min_vi_estimate(aug, draws)
        return summary.z_hat[self.net_.num_nodes :]

    def predictive_similarity(self, new_layers):
        """Augmented co-clustering matrix over in-sample plus new nodes,
        in-sample part mapped back to input order."""
        check_is_fitted(self, "trace_")
        labels = [str(lab) for lab in new_layers]
        aug = predictive_coclustering(self.trace_, self.net_, labels, self._prior_spec())
        idx = np.concatenate(
            [self._inverse_order(), self.net_.num_nodes + np.arange(len(new_layers))]
        )
        return aug[np.ix_(idx, idx)]

    def predict_edge_probabilities(self, new_layers):
        """k x (V+k) predictive edge probabilities, input node order."""
        check_is_fitted(self, "trace_")
        rng = np.random.default_rng(self.random_state + 2)
        probs = edge_probabilities(
            self.trace_,
            self.net_,
            [str(lab) for lab in new_layers],
            self._prior_spec(),
            rng,
            self.a,
            self.b,
        )
        idx = np.concatenate(
            [self._inverse_order(), self.net_.num_nodes + np.arange(len(new_layers))]
        )
        return probs[:, idx]
