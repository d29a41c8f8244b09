"""Conjugate (Diaconis-Ylvisaker) prior on baseline log-linear parameters.

The prior density is proportional to ``exp(<theta, s> - alpha * k(theta))``
where ``k`` is the log-partition function of the model. Hyperparameters
``(s, alpha)`` behave like the model margins and grand total of a fictive
table; that table is what every construction below starts from.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NumericError
from .graph import Graph, bits, is_decomposable, mask_of, popcount, prime_decomposition
from .model import (
    InteractionSet,
    graphical_interactions,
    probs_from_theta,
)
from .table import Table

__all__ = [
    "HyperParams",
    "HyperDirichletParams",
    "ProperDiagnostic",
    "hyperparams_from_theta",
    "hyperparams_from_fictive_table",
    "ipf",
    "margin_table",
    "check_proper",
    "posterior_hyperparams",
    "hyperdirichlet_params",
    "exact_log_norm_const",
    "dirichlet_log_norm_const",
    "factorized_log_norm_const",
    "log_norm_const",
    "prior_moment_odds",
    "prior_moment_prob",
]

IPF_TOL = 1e-10
IPF_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class HyperParams:
    """``s`` is aligned with ``iset.params``; ``alpha`` is the fictive total."""

    iset: InteractionSet
    s: np.ndarray
    alpha: float

    def __post_init__(self):
        s = np.array(self.s, dtype=float).reshape(-1)
        if s.shape != (self.iset.dim,):
            raise DomainError(f"s has {s.size} entries, model needs {self.iset.dim}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def mean(self) -> np.ndarray:
        """``s / alpha``: the prior's point in the marginal mean space."""
        return self.s / self.alpha

    def restrict(self, mask: int) -> "HyperParams":
        """Hyperparameters of the marginal model on the variables in ``mask``."""
        sub, index = self.iset.restrict(mask)
        return HyperParams(sub, self.s[index], self.alpha)

    def replace(self, s=None, alpha=None) -> "HyperParams":
        return HyperParams(self.iset, self.s if s is None else s,
                           self.alpha if alpha is None else alpha)


def hyperparams_from_theta(theta, iset: InteractionSet, alpha: float) -> HyperParams:
    """Hyperparameters whose mean is the margin vector of the model at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise DomainError("theta must be finite")
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    rho = probs_from_theta(theta, iset)
    return HyperParams(iset, alpha * iset.margins(rho), alpha)


def _broadcast_shape(levels, mask):
    return tuple(k if mask >> v & 1 else 1 for v, k in enumerate(levels))


def ipf(targets: dict[int, np.ndarray], levels: Sequence[int], start=None,
        tol: float = IPF_TOL, max_sweeps: int = IPF_MAX_SWEEPS):
    """Iterative proportional fitting of a joint table to generator margins.

    ``targets`` maps a variable mask to its full marginal table (axes in
    variable order). Returns ``(table, residual, sweeps)`` where ``residual``
    is the largest absolute margin discrepancy after the last sweep.
    """
    levels = tuple(levels)
    n = len(levels)
    fitted = (np.ones(levels) if start is None else np.array(start, dtype=float).reshape(levels))
    total = next(iter(targets.values())).sum() if targets else fitted.sum()
    fitted *= total / fitted.sum()
    shaped = {m: np.asarray(t, dtype=float).reshape(_broadcast_shape(levels, m))
              for m, t in targets.items()}
    axes = {m: tuple(v for v in range(n) if not m >> v & 1) for m in targets}
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        for m, target in shaped.items():
            current = fitted.sum(axis=axes[m], keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(current > 0, target / current, 0.0)
            fitted *= ratio
        residual = max(
            (float(np.max(np.abs(fitted.sum(axis=axes[m], keepdims=True) - t)))
             for m, t in shaped.items()), default=0.0)
        if residual <= tol:
            return fitted, residual, sweep
    return fitted, residual, max_sweeps


def hyperparams_from_fictive_table(fictive: Table, iset: InteractionSet,
                                   fit: bool = True) -> HyperParams:
    """Hyperparameters from the model margins of a strictly positive fictive table.

    With ``fit`` the model MLE of the fictive table is computed by IPF; it
    exists because every cell is positive, and its margins equal the
    fictive margins, which become ``s``.
    """
    if tuple(fictive.levels) != iset.levels:
        raise DomainError("fictive table and model have different variables")
    counts = np.asarray(fictive.counts, dtype=float)
    if np.any(~(counts > 0)):
        raise DomainError("fictive table cells must be strictly positive")
    alpha = float(counts.sum())
    if fit:
        targets = {g: fictive.margin(bits(g)) / alpha for g in iset.generators}
        _, residual, _ = ipf(targets, iset.levels)
        if residual > IPF_TOL:
            raise NumericError("IPF did not converge on the fictive table", residual=residual)
    return HyperParams(iset, iset.margins(counts), alpha)


def margin_table(hp: HyperParams, mask: int) -> np.ndarray:
    """Full marginal table over ``mask`` implied by ``(s, alpha)``.

    Every subset of ``mask`` must be a term of the model. The cell with
    nonzero coordinates ``i_D`` on ``D`` and zeros elsewhere receives the
    alternating sum of ``s(j_F)`` over ``D <= F <= mask`` with ``j_F``
    extending ``i_D``, the empty term contributing ``alpha``. These are the
    hyper-Dirichlet exponents of a clique or separator.
    """
    iset = hp.iset
    vs = bits(mask)
    pos = {v: k for k, v in enumerate(vs)}
    out = np.zeros(tuple(iset.levels[v] for v in vs))
    out[(0,) * len(vs)] = hp.alpha
    terms = [t for t in iset.terms if t & mask == t]
    needed = 0
    sub = mask
    while sub:
        needed += 1
        sub = (sub - 1) & mask
    if len(terms) != needed:
        raise DomainError("model does not contain every subset of the requested margin")
    for t in terms:
        tv = bits(t)
        size = len(tv)
        block = hp.s[iset.term_slices[t]]
        for lv, value in zip(product(*(range(1, iset.levels[v]) for v in tv)), block):
            for keep in range(1 << size):
                cell = [0] * len(vs)
                for j in range(size):
                    if keep >> j & 1:
                        cell[pos[tv[j]]] = lv[j]
                sign = -1.0 if (size - popcount(keep)) % 2 else 1.0
                out[tuple(cell)] += sign * value
    return out


@dataclass(frozen=True)
class ProperDiagnostic:
    proper: bool
    residual: float
    min_cell: float = float("nan")

    def __bool__(self):
        return self.proper


def check_proper(hp: HyperParams, tol: float = 1e-8) -> ProperDiagnostic:
    """Decide whether ``s / alpha`` is an interior point of the marginal mean space.

    IPF from the uniform table is run against the generator margins implied
    by ``(s, alpha)``; the prior is declared proper when the fit matches the
    model margins within ``tol`` and every fitted cell is positive.
    """
    if not (hp.alpha > 0 and np.all(np.isfinite(hp.s))):
        return ProperDiagnostic(False, float("inf"))
    iset = hp.iset
    targets = {}
    for g in iset.generators:
        t = margin_table(hp, g) / hp.alpha
        if np.any(t <= 0):
            return ProperDiagnostic(False, float(np.abs(t.min())), float(t.min()))
        targets[g] = t
    fitted, _, _ = ipf(targets, iset.levels)
    rho = fitted.reshape(-1)
    residual = float(np.max(np.abs(iset.margins(rho) - hp.mean), initial=0.0))
    min_cell = float(rho.min())
    return ProperDiagnostic(bool(residual <= tol and min_cell > 1e-12), residual, min_cell)


def posterior_hyperparams(hp: HyperParams, data: Table) -> HyperParams:
    """Conjugate update: ``s + n(i_D)``, ``alpha + N``."""
    if tuple(data.levels) != hp.iset.levels:
        raise DomainError("data and model have different variables")
    counts = np.asarray(data.counts, dtype=float)
    return HyperParams(hp.iset, hp.s + hp.iset.margins(counts), hp.alpha + counts.sum())


@dataclass(frozen=True)
class HyperDirichletParams:
    """Dirichlet exponents per clique and separator of a perfect sequence.

    Each exponent array is the full marginal table over the listed
    variables (axes in variable order); the all-zero cell holds the
    ``alpha_0`` exponent. The first separator is empty.
    """

    cliques: tuple[tuple[int, np.ndarray], ...]
    separators: tuple[tuple[int, np.ndarray], ...]
    alpha: float


def _check_graph(hp: HyperParams, graph: Graph | None) -> Graph:
    iset = hp.iset
    graph = iset.graph() if graph is None else graph
    if graph.n != iset.nvars:
        raise DomainError("graph and model have different variables")
    if frozenset(graphical_interactions(graph, iset.levels).terms) != iset.term_set:
        raise DomainError("model is not the graphical model of the graph")
    return graph


def hyperdirichlet_params(hp: HyperParams, graph: Graph | None = None) -> HyperDirichletParams:
    """Hyper-Dirichlet exponents equivalent to ``hp`` on a decomposable graph."""
    graph = _check_graph(hp, graph)
    if not is_decomposable(graph):
        raise DomainError("graph is not decomposable")
    dec = prime_decomposition(graph)
    cliques = tuple((c, margin_table(hp, c)) for c in dec.components)
    seps = tuple((s, margin_table(hp, s) if s else np.array(hp.alpha))
                 for s in dec.separators)
    return HyperDirichletParams(cliques, seps, hp.alpha)


def _sum_gammaln(arr: np.ndarray) -> float:
    if np.any(~(arr > 0)):
        raise DomainError("nonpositive Dirichlet exponent: hyperparameters are improper")
    return float(gammaln(arr).sum())


def exact_log_norm_const(hp: HyperParams, graph: Graph | None = None) -> float:
    """Closed-form log normalizing constant for a decomposable graphical model."""
    hd = hyperdirichlet_params(hp, graph)
    total = -float(gammaln(hd.alpha))
    for _, arr in hd.cliques:
        total += _sum_gammaln(arr)
    for mask, arr in hd.separators[1:]:
        total -= _sum_gammaln(arr)
    return total


def dirichlet_log_norm_const(hp: HyperParams) -> float:
    """Log normalizer of a saturated model: a single Dirichlet."""
    full = (1 << hp.iset.nvars) - 1
    if full not in hp.iset.term_set:
        raise DomainError("model is not saturated")
    return _sum_gammaln(margin_table(hp, full)) - float(gammaln(hp.alpha))


def _default_prime_evaluator(sub: HyperParams) -> float:
    full = (1 << sub.iset.nvars) - 1
    if full in sub.iset.term_set:
        return dirichlet_log_norm_const(sub)
    from .laplace import laplace_log_norm_const
    return laplace_log_norm_const(sub).log_norm_const


def factorized_log_norm_const(hp: HyperParams, graph: Graph | None = None,
                              prime_evaluator: Callable[[HyperParams], float] | None = None
                              ) -> float:
    """Log normalizer assembled over the prime components of the graph.

    Each prime component and each separator contributes the normalizer of
    its marginal model with hyperparameters restricted from ``hp``; the
    separator terms are subtracted. ``prime_evaluator`` defaults to the
    Dirichlet formula for complete components and Laplace otherwise.
    """
    graph = _check_graph(hp, graph)
    evaluate = prime_evaluator or _default_prime_evaluator
    dec = prime_decomposition(graph)
    total = 0.0
    for comp, sep in zip(dec.components, dec.separators):
        total += evaluate(hp.restrict(comp))
        if sep:
            total -= dirichlet_log_norm_const(hp.restrict(sep))
    return total


def log_norm_const(hp: HyperParams, method: str = "auto") -> float:
    """Log normalizing constant by ``exact``, ``pm`` (prime components) or ``laplace``.

    ``auto`` is exact for decomposable models and Laplace otherwise.
    """
    iset = hp.iset
    if method == "auto":
        method = "exact" if iset.is_decomposable() else "laplace"
    if method == "exact":
        if not iset.is_decomposable():
            raise DomainError("exact normalizer needs a decomposable graphical model")
        return exact_log_norm_const(hp)
    if method == "pm":
        if not iset.is_graphical():
            raise DomainError("prime-component normalizer needs a graphical model")
        return factorized_log_norm_const(hp)
    if method == "laplace":
        from .laplace import laplace_log_norm_const
        return laplace_log_norm_const(hp).log_norm_const
    raise DomainError(f"unknown method {method!r}")


def _moment_ratio(hp: HyperParams, shifted: HyperParams, method: str) -> float:
    if not check_proper(shifted):
        raise DomainError("shifted hyperparameters are improper; moment does not exist")
    return float(np.exp(log_norm_const(shifted, method) - log_norm_const(hp, method)))


def prior_moment_odds(hp: HyperParams, term: int, levels: Sequence[int] | None = None,
                      r: int = 1, method: str = "auto") -> float:
    """``E[exp(r * theta(i_D))]`` for the parameter of ``term`` at ``levels``.

    This is the r-th moment of the generalized odds ratio of the term.
    """
    if r == 0:
        return 1.0
    iset = hp.iset
    levels = tuple(levels) if levels is not None else (1,) * popcount(term)
    try:
        k = iset.param_index[(term, levels)]
    except KeyError:
        raise DomainError("no such parameter in the model") from None
    s = hp.s.copy()
    s[k] += r
    return _moment_ratio(hp, hp.replace(s=s), method)


def prior_moment_prob(hp: HyperParams, cell: Sequence[int], r: int = 1,
                      method: str = "auto") -> float:
    """``E[p(i)^r]`` for the full cell ``i`` (one level per variable)."""
    iset = hp.iset
    cell = tuple(int(c) for c in cell)
    if len(cell) != iset.nvars or any(not 0 <= c < k for c, k in zip(cell, iset.levels)):
        raise DomainError("cell does not match the model's variables")
    if r == 0:
        return 1.0
    support = mask_of(v for v, c in enumerate(cell) if c)
    s = hp.s.copy()
    for t in iset.terms:
        if t & support == t:
            s[iset.param_index[(t, tuple(cell[v] for v in bits(t)))]] += r
    return _moment_ratio(hp, hp.replace(s=s, alpha=hp.alpha + r), method)
