"""Exact marginal likelihood integrals for discrete independence models and
their two-component mixtures."""

from .coefficients import BlockPartition, phi_naive, phi_recurrence
from .integrator import (IntegralResult, MapPoint, PriorSpec, asymptotic_F, bayes_factor, bic_score,
                         likelihood_at, mixture_marginal)
from .lattice import col_hnf, index_of_subset, monomial_bounds, row_hnf, zonotope_lattice_count
from .model import ExponentMatrix, ModelSpec, independence_marginal, reduced_model

__all__ = [
    "BlockPartition", "ExponentMatrix", "IntegralResult", "MapPoint", "ModelSpec", "PriorSpec",
    "asymptotic_F", "bayes_factor", "bic_score", "col_hnf", "independence_marginal", "index_of_subset",
    "likelihood_at", "mixture_marginal", "monomial_bounds", "phi_naive", "phi_recurrence",
    "reduced_model", "row_hnf", "zonotope_lattice_count",
]

__version__ = "0.1.0"
