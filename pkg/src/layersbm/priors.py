"""Specification of the two-level partition prior."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .eppf import DirichletKernel, EppfKernel, StableKernel

__all__ = ["GammaHyperprior", "PriorSpec"]


@dataclass(frozen=True)
class GammaHyperprior:
    """gamma(alpha, beta) on the layer-level concentration and
    gamma(alpha0, beta0) on the shared-level one; shape / rate convention."""

    alpha: float
    beta: float
    alpha0: float
    beta0: float

    def __post_init__(self):
        if min(self.alpha, self.beta, self.alpha0, self.beta0) <= 0:
            raise ValueError("gamma hyperprior parameters must be positive")


@dataclass(frozen=True)
class PriorSpec:
    """Which EPPF governs each hierarchy level, plus optional hyperpriors.

    ``level1`` drives the within-layer subgroup partitions, ``level0`` the
    assignment of shared profiles to subgroups.  Gamma hyperpriors are only
    meaningful when both levels are Dirichlet kernels.
    """

    level1: EppfKernel
    level0: EppfKernel
    hyper: GammaHyperprior | None = None

    def __post_init__(self):
        if self.hyper is not None and self.family != "dp":
            raise ValueError("concentration hyperpriors require Dirichlet kernels at both levels")

    @property
    def family(self) -> str:
        if isinstance(self.level1, DirichletKernel) and isinstance(self.level0, DirichletKernel):
            return "dp"
        if isinstance(self.level1, StableKernel) and isinstance(self.level0, StableKernel):
            return "nsp"
        return "generic"

    def with_concentrations(self, theta: float, theta0: float) -> "PriorSpec":
        """New spec with updated Dirichlet concentrations (hyperprior step)."""
        if self.family != "dp":
            raise ValueError("concentrations only exist for Dirichlet kernels")
        return replace(self, level1=DirichletKernel(theta), level0=DirichletKernel(theta0))

    @staticmethod
    def hdp(theta: float, theta0: float, hyper: GammaHyperprior | None = None) -> "PriorSpec":
        return PriorSpec(DirichletKernel(theta), DirichletKernel(theta0), hyper)

    @staticmethod
    def hnsp(sigma: float, sigma0: float) -> "PriorSpec":
        return PriorSpec(StableKernel(sigma), StableKernel(sigma0))

    @staticmethod
    def hdp_hyper(alpha: float, beta: float, alpha0: float, beta0: float) -> "PriorSpec":
        """Dirichlet levels with gamma hyperpriors, initialized at the prior means."""
        hyper = GammaHyperprior(alpha, beta, alpha0, beta0)
        return PriorSpec.hdp(alpha / beta, alpha0 / beta0, hyper)
