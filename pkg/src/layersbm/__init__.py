"""Stochastic block models with layer-aware hierarchical partition priors.

Node-colored multilayer networks carry a single edge relation over nodes
split into disjoint layers.  This package couples a collapsed beta-binomial
block likelihood with a partition prior built from two nested exchangeable
partition levels (within-layer subgroups carrying shared profiles), giving
closed-form urns, a collapsed Gibbs sampler, partition-space posterior
summaries, and prediction of allocations and edges for nodes whose only
observed feature is their layer.
"""

__version__ = "0.1.0"

from .eppf import DirichletKernel, GenericKernel, StableKernel, validate_addition_rule
from .estimator import MultilayerSBM
from .franchise import (
    FranchiseState,
    coclustering_probability,
    elicitation_check,
    joint_conditional,
    marginal_urn,
    peppf_log_mass,
)
from .likelihood import BlockCounts, induced_counts
from .network import SupraNetwork, load_network
from .posterior import min_vi_estimate, similarity, vi_distance, waic
from .predict import (
    edge_probabilities,
    joint_config_logprob,
    predictive_coclustering,
    sample_new_allocations,
)
from .priors import GammaHyperprior, PriorSpec
from .sampler import SamplerConfig, SampleTrace, hyperprior_step, run_chain, run_chains
from .simulate import ScenarioSpec, generate_scenario, sample_prior_partition, scenario_spec

__all__ = [
    "__version__",
    "BlockCounts",
    "DirichletKernel",
    "FranchiseState",
    "GammaHyperprior",
    "GenericKernel",
    "MultilayerSBM",
    "PriorSpec",
    "SampleTrace",
    "SamplerConfig",
    "ScenarioSpec",
    "StableKernel",
    "SupraNetwork",
    "coclustering_probability",
    "edge_probabilities",
    "elicitation_check",
    "generate_scenario",
    "hyperprior_step",
    "induced_counts",
    "joint_conditional",
    "joint_config_logprob",
    "load_network",
    "marginal_urn",
    "min_vi_estimate",
    "peppf_log_mass",
    "predictive_coclustering",
    "run_chain",
    "run_chains",
    "sample_new_allocations",
    "sample_prior_partition",
    "scenario_spec",
    "similarity",
    "validate_addition_rule",
    "vi_distance",
    "waic",
]
