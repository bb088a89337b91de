"""Bayesian inference through spectral expansions of the likelihood."""

from .asle import AuxiliarySpec, fit_asle, posterior_surrogate_asle, two_step_adapt
from .design import ExperimentalDesign, PseudoRandom, Sobol, make_design
from .multibasis import BasisSpec, hyperbolic_set, total_degree_set
from .poly1d import Family
from .reference import Chain, conjugate_evidence, conjugate_posterior, crude_mc_evidence, rwm_sample
from .regression import FitReport, PolynomialChaosExpansion, design_matrix, loo_by_refit, ols_fit
from .sle import (
    Expansion,
    PosteriorSummary,
    SpectralLikelihoodExpansion,
    evidence,
    fit_sle,
    marginal_1d,
    marginal_2d,
    monomial_coeffs,
    posterior_covariance,
    posterior_mean,
    posterior_surrogate,
    posterior_variance,
    qoi_expectation,
    summarize,
)
from .transforms import Gaussian, Lognormal, PriorSpec, Uniform

__version__ = "0.1.0"

__all__ = [
    "AuxiliarySpec",
    "BasisSpec",
    "Chain",
    "ExperimentalDesign",
    "Expansion",
    "Family",
    "FitReport",
    "Gaussian",
    "Lognormal",
    "PolynomialChaosExpansion",
    "PosteriorSummary",
    "PriorSpec",
    "PseudoRandom",
    "Sobol",
    "SpectralLikelihoodExpansion",
    "Uniform",
    "conjugate_evidence",
    "conjugate_posterior",
    "crude_mc_evidence",
    "design_matrix",
    "evidence",
    "fit_asle",
    "fit_sle",
    "hyperbolic_set",
    "loo_by_refit",
    "make_design",
    "marginal_1d",
    "marginal_2d",
    "monomial_coeffs",
    "ols_fit",
    "posterior_covariance",
    "posterior_mean",
    "posterior_surrogate",
    "posterior_surrogate_asle",
    "posterior_variance",
    "qoi_expectation",
    "rwm_sample",
    "summarize",
    "total_degree_set",
    "two_step_adapt",
]
