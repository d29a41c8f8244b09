"""MC3 search over decomposable, graphical and hierarchical log-linear models.

Each chain proposes a model uniformly from the neighbourhood of the current
one and accepts with the Metropolis ratio of marginal likelihoods, corrected
by neighbourhood sizes. Every model's hyperparameters are the margins of one
shared fictive table, so priors are consistent across models.
"""
from __future__ import annotations

import os
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Hashable

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NumericError
from .graph import (
    Graph,
    bits,
    decomposable_neighbors,
    graphical_neighbors,
    is_decomposable,
    mask_key,
    popcount,
)
from .model import InteractionSet, downward_closure, format_formula, graphical_interactions, term_name
from .prior import HyperParams, hyperparams_from_fictive_table, log_norm_const, posterior_hyperparams
from .table import Table, uniform_table

__all__ = [
    "MODEL_CLASSES",
    "SearchConfig",
    "ModelState",
    "ModelSpace",
    "Evidence",
    "VisitRecord",
    "SearchResult",
    "log_marginal_likelihood",
    "acceptance_probability",
    "mc3_step",
    "run_chain",
    "run_chains",
    "posterior_summaries",
]

MODEL_CLASSES = ("decomposable", "graphical-pm", "graphical-laplace", "hierarchical")
_ALIASES = {"dec": "decomposable", "pm": "graphical-pm", "laplace": "graphical-laplace",
            "graphical": "graphical-laplace", "hier": "hierarchical"}
_METHOD = {"decomposable": "exact", "graphical-pm": "pm",
           "graphical-laplace": "laplace", "hierarchical": "laplace"}


def canonical_class(tag: str) -> str:
    tag = _ALIASES.get(tag, tag)
    if tag not in MODEL_CLASSES:
        raise DomainError(f"unknown model class {tag!r}")
    return tag


@dataclass(frozen=True)
class SearchConfig:
    """Settings of an MC3 run. ``iterations`` counts burn-in steps too."""

    model_class: str = "decomposable"
    alpha: float = 1.0
    iterations: int = 25_000
    burnin: int = 5_000
    chains: int = 4
    seed: int = 0
    threshold: float = 0.05
    estimator: str = "renormalized"
    threads: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "model_class", canonical_class(self.model_class))
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if self.iterations < 1:
            raise DomainError("iterations must be at least 1")
        if not 0 <= self.burnin < self.iterations:
            raise DomainError("burnin must be nonnegative and smaller than iterations")
        if self.chains < 1:
            raise DomainError("chains must be at least 1")
        if not 0 <= self.threshold <= 1:
            raise DomainError("threshold must lie in [0, 1]")
        if self.estimator not in ("renormalized", "visits"):
            raise DomainError(f"unknown estimator {self.estimator!r}")
        if self.threads is not None and self.threads < 1:
            raise DomainError("threads must be at least 1")

    @property
    def method(self) -> str:
        return _METHOD[self.model_class]


def log_marginal_likelihood(hp: HyperParams, data: Table, method: str = "auto") -> float:
    """``log I(s + y, alpha + N) - log I(s, alpha)``."""
    post = posterior_hyperparams(hp, data)
    return log_norm_const(post, method) - log_norm_const(hp, method)


class Evidence:
    """Cached log marginal likelihoods under one data table and fictive table.

    Values are pure functions of the model, so the cache may be shared by
    concurrent chains.
    """

    def __init__(self, data: Table, fictive: Table, method: str):
        if tuple(data.levels) != tuple(fictive.levels):
            raise DomainError("data and fictive table have different variables")
        self.data = data
        self.fictive = fictive
        self.method = method
        self._cache: dict[Hashable, float] = {}
        self._lock = threading.Lock()

    def hyperparams(self, iset: InteractionSet) -> HyperParams:
        # The fictive table is strictly positive, so the model MLE exists and
        # its margins are the fictive margins: no fit is needed here.
        return hyperparams_from_fictive_table(self.fictive, iset, fit=False)

    def __call__(self, iset: InteractionSet) -> float:
        key = iset.key
        value = self._cache.get(key)
        if value is None:
            try:
                value = log_marginal_likelihood(self.hyperparams(iset), self.data, self.method)
            except NumericError as exc:
                raise NumericError(f"{exc} (model {iset.formula()})", formula=iset.formula(),
                                   **exc.info) from exc
            with self._lock:
                self._cache[key] = value
        return value

    def __len__(self):
        return len(self._cache)


@dataclass(frozen=True)
class ModelState:
    """A point of the model space with its cached evidence and neighbourhood size."""

    model_class: str
    structure: Graph | InteractionSet
    iset: InteractionSet
    log_ml: float
    nbrd_size: int

    @property
    def key(self):
        return self.iset.key

    @property
    def formula(self) -> str:
        return self.iset.formula()


class ModelSpace:
    """Neighbourhood structure and model construction for one model class."""

    def __init__(self, model_class: str, levels, names, evidence: Evidence):
        self.model_class = canonical_class(model_class)
        self.levels = tuple(levels)
        self.names = tuple(names)
        self.n = len(self.levels)
        self.evidence = evidence
        self._neighbors: dict = {}
        self._states: dict = {}

    # structures -------------------------------------------------------
    def _structure_key(self, structure):
        return structure.key

    def _iset(self, structure) -> InteractionSet:
        if isinstance(structure, Graph):
            return graphical_interactions(structure, self.levels)
        return structure

    def neighbors(self, structure) -> list:
        key = self._structure_key(structure)
        out = self._neighbors.get(key)
        if out is None:
            if self.model_class == "decomposable":
                out = decomposable_neighbors(structure)
            elif self.model_class == "hierarchical":
                out = hierarchical_neighbors(structure)
            else:
                out = graphical_neighbors(structure)
            self._neighbors[key] = out
        return out

    def state(self, structure) -> ModelState:
        key = self._structure_key(structure)
        st = self._states.get(key)
        if st is None:
            self.validate(structure)
            iset = self._iset(structure)
            st = ModelState(self.model_class, structure, iset, self.evidence(iset),
                            len(self.neighbors(structure)))
            self._states[key] = st
        return st

    def validate(self, structure) -> None:
        if self.model_class == "hierarchical":
            if not isinstance(structure, InteractionSet):
                raise DomainError("hierarchical states are interaction sets")
        else:
            if not isinstance(structure, Graph):
                raise DomainError("graphical states are graphs")
            if self.model_class == "decomposable" and not is_decomposable(structure):
                raise DomainError("state is not decomposable")

    def random_start(self, rng: np.random.Generator):
        """Fair-coin inclusion of every edge (or two-way term), repaired to the class."""
        pairs = list(combinations(range(self.n), 2))
        chosen = [pq for pq in pairs if rng.random() < 0.5]
        if self.model_class == "hierarchical":
            return downward_closure([(1 << p) | (1 << q) for p, q in chosen],
                                    self.levels, self.names)
        g = Graph.from_edges(self.names, chosen)
        if self.model_class == "decomposable":
            while not is_decomposable(g):
                edges = g.edges
                i, j = edges[rng.integers(len(edges))]
                g = g.toggle(i, j)
        return g


def hierarchical_neighbors(iset: InteractionSet) -> list[InteractionSet]:
    """Add one dual generator or drop one generator that is not a main effect."""
    terms = iset.term_set
    out = [iset.with_terms(terms | {d}) for d in sorted(iset.dual_generators, key=mask_key)]
    out += [iset.with_terms(terms - {g}) for g in sorted(iset.generators, key=mask_key)
            if popcount(g) > 1]
    return out


def acceptance_probability(log_ml_current: float, nbrd_current: int,
                           log_ml_candidate: float, nbrd_candidate: int) -> float:
    """``min(1, [ML' / #nbrd'] / [ML / #nbrd])`` computed on the log scale."""
    log_ratio = (log_ml_candidate - log_ml_current
                 + np.log(nbrd_current) - np.log(nbrd_candidate))
    return float(np.exp(min(0.0, log_ratio)))


def mc3_step(space: ModelSpace, state: ModelState, rng: np.random.Generator
             ) -> tuple[ModelState, bool]:
    """One Metropolis step; returns the new state and whether it moved."""
    nbrs = space.neighbors(state.structure)
    if not nbrs:
        return state, False
    candidate = space.state(nbrs[rng.integers(len(nbrs))])
    prob = acceptance_probability(state.log_ml, state.nbrd_size,
                                  candidate.log_ml, candidate.nbrd_size)
    if prob >= 1.0 or rng.random() < prob:
        return candidate, True
    return state, False


@dataclass
class VisitRecord:
    """Post-burn-in visits of one chain, keyed by formula."""

    chain: int
    seed: int
    first_iteration: int
    last_iteration: int
    visits: dict[str, int] = field(default_factory=dict)
    log_ml: dict[str, float] = field(default_factory=dict)
    terms: dict[str, frozenset] = field(default_factory=dict)
    accepted: int = 0
    start: str = ""


def run_chain(space: ModelSpace, config: SearchConfig, chain: int,
              start=None) -> VisitRecord:
    seed = config.seed ^ chain
    rng = np.random.default_rng(seed)
    structure = space.random_start(rng) if start is None else start
    state = space.state(structure)
    record = VisitRecord(chain, seed, config.burnin + 1, config.iterations, start=state.formula)
    counts: Counter = Counter()
    for t in range(1, config.iterations + 1):
        state, moved = mc3_step(space, state, rng)
        record.accepted += moved
        if t > config.burnin:
            counts[state.key] += 1
            if state.key not in record.log_ml:
                record.log_ml[state.key] = state.log_ml
                record.terms[state.key] = state.iset.term_set
    formulas = {}
    for key in record.log_ml:
        formulas[key] = format_formula(key, space.names)
    record.visits = {formulas[k]: counts[k] for k in counts}
    record.log_ml = {formulas[k]: v for k, v in record.log_ml.items()}
    record.terms = {formulas[k]: v for k, v in record.terms.items()}
    return record


@dataclass
class SearchResult:
    config: SearchConfig
    names: tuple[str, ...]
    records: list[VisitRecord]
    evaluated: int = 0
    levels: tuple[int, ...] = ()

    def merged(self) -> dict[str, dict]:
        """Per formula: total visits, log marginal likelihood and term set."""
        out: dict[str, dict] = {}
        for rec in self.records:
            for formula, count in rec.visits.items():
                entry = out.setdefault(formula, {"visits": 0, "log_ml": rec.log_ml[formula],
                                                 "terms": rec.terms[formula]})
                entry["visits"] += count
        return out


def _thread_count(config: SearchConfig) -> int:
    if config.threads is not None:
        return config.threads
    env = os.environ.get("LOGLIN_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise DomainError("LOGLIN_THREADS must be a positive integer") from None
        if value < 1:
            raise DomainError("LOGLIN_THREADS must be a positive integer")
        return value
    return 1


def run_chains(config: SearchConfig, data: Table, fictive: Table | None = None,
               start=None) -> SearchResult:
    """Run independent chains (seed ``config.seed ^ chain``) and collect visits.

    ``fictive`` defaults to the uniform table with total ``config.alpha``.
    Results do not depend on the number of threads.
    """
    if fictive is None:
        fictive = uniform_table(data.levels, config.alpha, data.names)
    elif not np.isclose(fictive.total, config.alpha):
        raise DomainError("fictive table total differs from alpha")
    evidence = Evidence(data, fictive, config.method)

    def work(chain: int) -> VisitRecord:
        space = ModelSpace(config.model_class, data.levels, data.names, evidence)
        return run_chain(space, config, chain, start)

    threads = min(_thread_count(config), config.chains)
    if threads == 1:
        records = [work(c) for c in range(config.chains)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(work, range(config.chains)))
    return SearchResult(config, tuple(data.names), records, len(evidence), tuple(data.levels))


def posterior_summaries(result: SearchResult, estimator: str | None = None,
                        threshold: float | None = None) -> dict:
    """JSON-ready report of model probabilities, median model and inclusions.

    The default estimator renormalizes ``exp(log_ml)`` over the distinct
    visited models; ``visits`` uses post-burn-in visit frequencies.
    """
    config = result.config
    estimator = estimator or config.estimator
    threshold = config.threshold if threshold is None else threshold
    merged = result.merged()
    if not merged:
        raise DomainError("no visited models")
    formulas = list(merged)
    log_ml = np.array([merged[f]["log_ml"] for f in formulas])
    visits = np.array([merged[f]["visits"] for f in formulas], dtype=float)
    if estimator == "visits":
        probs = visits / visits.sum()
    elif estimator == "renormalized":
        probs = np.exp(log_ml - logsumexp(log_ml))
    else:
        raise DomainError(f"unknown estimator {estimator!r}")
    order = sorted(range(len(formulas)), key=lambda k: (-probs[k], formulas[k]))
    names = result.names
    inclusion: dict[int, float] = {}
    for k, f in enumerate(formulas):
        for t in merged[f]["terms"]:
            if popcount(t) > 1:
                inclusion[t] = inclusion.get(t, 0.0) + float(probs[k])
    n = len(names)
    for t in combinations(range(n), 2):
        inclusion.setdefault((1 << t[0]) | (1 << t[1]), 0.0)
    median_terms = [t for t, v in inclusion.items() if v > 0.5] + [1 << v for v in range(n)]
    median = downward_closure(median_terms, result.levels or (2,) * n, names)
    models = [{"formula": formulas[k], "log_ml": float(log_ml[k]), "prob": float(probs[k]),
               "visits": int(visits[k])} for k in order]
    return {
        "class": config.model_class,
        "alpha": config.alpha,
        "estimator": estimator,
        "threshold": threshold,
        "models": models,
        "above_threshold": [m["formula"] for m in models if m["prob"] > threshold],
        "median_model": median.formula(),
        "inclusion": {term_name(t, names): min(1.0, inclusion[t])
                      for t in sorted(inclusion, key=mask_key)},
        "chains": config.chains,
        "iterations": config.iterations,
        "burnin": config.burnin,
        "seed": config.seed,
        "distinct_models": len(formulas),
        "acceptance_rate": float(sum(r.accepted for r in result.records)
                                 / (config.chains * config.iterations)),
    }
