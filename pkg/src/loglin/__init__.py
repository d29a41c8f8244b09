"""Bayesian model selection for hierarchical log-linear models.

Conjugate priors on baseline-constrained log-linear parameters, exact and
Laplace normalizing constants, the induced prior on cell probabilities,
and MC3 search over decomposable, graphical and hierarchical models.
"""
from .errors import DomainError, NumericError, ParseError
from .graph import Graph, is_decomposable, parse_graph, prime_decomposition
from .induced import induced_log_density, jacobian_det
from .laplace import laplace_log_norm_const
from .model import (
    InteractionSet,
    graphical_interactions,
    model_from_formula,
    probs_from_theta,
    saturated,
    theta_from_probs,
)
from .prior import (
    HyperParams,
    check_proper,
    exact_log_norm_const,
    factorized_log_norm_const,
    hyperparams_from_fictive_table,
    hyperparams_from_theta,
    log_norm_const,
    posterior_hyperparams,
)
from .search import SearchConfig, log_marginal_likelihood, posterior_summaries, run_chains
from .table import Table, load_table, uniform_table

__version__ = "0.1.0"
