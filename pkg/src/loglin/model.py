"""Hierarchical log-linear models under baseline (corner) constraints.

A model is an :class:`InteractionSet`: a downward-closed family of nonempty
variable subsets (bitmasks) that always contains every main effect. Its free
parameters are ``theta[(D, i_D)]`` for ``D`` in the family and ``i_D`` ranging
over the level combinations of ``D`` with no zero coordinate. Parameter
vectors and cell-probability tables are plain numpy arrays aligned with
:attr:`InteractionSet.params` and with the lexicographic cell order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NumericError
from .graph import Graph, bits, complete_subsets, is_decomposable, mask_key, mask_of, popcount
from .table import Table, default_names

__all__ = [
    "InteractionSet",
    "downward_closure",
    "saturated",
    "graphical_interactions",
    "generators",
    "dual_generators",
    "theta_from_probs",
    "probs_from_theta",
    "log_probs_from_theta",
    "log_partition",
    "log_unnormalized",
    "log_likelihood",
    "subset_sum_transform",
    "parse_formula",
    "format_formula",
    "term_name",
    "parse_term",
    "model_from_formula",
    "cell_grid",
]


@lru_cache(maxsize=64)
def cell_grid(levels: tuple[int, ...]) -> np.ndarray:
    """All cells as an ``(ncells, nvars)`` int array in lexicographic order."""
    grid = np.indices(levels).reshape(len(levels), -1).T
    grid = np.ascontiguousarray(grid)
    grid.setflags(write=False)
    return grid


@lru_cache(maxsize=64)
def _strides(levels: tuple[int, ...]) -> tuple[int, ...]:
    out = []
    step = 1
    for k in reversed(levels):
        out.append(step)
        step *= k
    return tuple(reversed(out))


def _nonbaseline_levels(levels, mask):
    return list(product(*(range(1, levels[v]) for v in bits(mask))))


@dataclass(frozen=True)
class InteractionSet:
    """Downward-closed family of interaction terms over variables ``names``."""

    levels: tuple[int, ...]
    terms: tuple[int, ...]
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        levels = tuple(int(k) for k in self.levels)
        if any(k < 2 for k in levels):
            raise DomainError("every variable needs at least two levels")
        names = tuple(self.names) or default_names(len(levels))
        if len(names) != len(levels):
            raise DomainError("one name per variable is required")
        n = len(levels)
        full = (1 << n) - 1
        terms = set()
        for t in self.terms:
            if t <= 0 or t & ~full:
                raise DomainError(f"term {t} is not a nonempty subset of the variables")
            terms.add(t)
        for v in range(n):
            if (1 << v) not in terms:
                raise DomainError(f"main effect {names[v]!r} missing")
        for t in terms:
            for v in bits(t):
                sub = t & ~(1 << v)
                if sub and sub not in terms:
                    raise DomainError("interaction set is not downward closed")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "terms", tuple(sorted(terms, key=mask_key)))

    @property
    def nvars(self) -> int:
        return len(self.levels)

    @property
    def ncells(self) -> int:
        return int(np.prod(self.levels))

    @cached_property
    def term_set(self) -> frozenset[int]:
        return frozenset(self.terms)

    @cached_property
    def params(self) -> tuple[tuple[int, tuple[int, ...]], ...]:
        """``(term mask, nonzero levels of the term's variables)`` per parameter."""
        return tuple((t, lv) for t in self.terms for lv in _nonbaseline_levels(self.levels, t))

    @cached_property
    def param_index(self) -> dict:
        return {p: k for k, p in enumerate(self.params)}

    @cached_property
    def term_slices(self) -> dict[int, slice]:
        out, start = {}, 0
        for t in self.terms:
            size = int(np.prod([self.levels[v] - 1 for v in bits(t)]))
            out[t] = slice(start, start + size)
            start += size
        return out

    @property
    def dim(self) -> int:
        return len(self.params)

    @cached_property
    def param_signs(self) -> np.ndarray:
        """``(-1)^{|D|-1}`` for each parameter."""
        return np.array([(-1.0) ** (popcount(t) - 1) for t, _ in self.params])

    @cached_property
    def design(self) -> np.ndarray:
        """0/1 matrix with ``X[i, (D, i_D)] = 1`` iff cell ``i`` restricted to D is ``i_D``.

        ``X @ theta`` gives the log of ``p(i) / p_0`` and ``X.T @ counts``
        the marginal counts ``n(i_D)``.
        """
        grid = cell_grid(self.levels)
        X = np.ones((grid.shape[0], self.dim))
        for k, (t, lv) in enumerate(self.params):
            for v, level in zip(bits(t), lv):
                X[:, k] *= grid[:, v] == level
        X.setflags(write=False)
        return X

    @cached_property
    def generators(self) -> tuple[int, ...]:
        return generators(self)

    @cached_property
    def dual_generators(self) -> tuple[int, ...]:
        return dual_generators(self)

    @cached_property
    def key(self) -> frozenset[int]:
        return frozenset(self.generators)

    @property
    def is_binary(self) -> bool:
        return all(k == 2 for k in self.levels)

    def with_terms(self, terms: Iterable[int]) -> "InteractionSet":
        return InteractionSet(self.levels, tuple(terms), self.names)

    def margins(self, counts) -> np.ndarray:
        """Marginal counts ``n(i_D)`` aligned with :attr:`params`."""
        return self.design.T @ np.asarray(counts, dtype=float)

    def restrict(self, mask: int) -> tuple["InteractionSet", np.ndarray]:
        """Sub-model on the variables in ``mask`` and its parameter positions here.

        The sub-model keeps the terms contained in ``mask``, relabelled to the
        kept variables in their original order.
        """
        keep = bits(mask)
        pos = {v: k for k, v in enumerate(keep)}
        relabel = {t: mask_of(pos[v] for v in bits(t)) for t in self.terms if t & mask == t}
        sub = InteractionSet(tuple(self.levels[v] for v in keep), tuple(relabel.values()),
                             tuple(self.names[v] for v in keep))
        index = [self.param_index[(t, lv)] for t in relabel
                 for lv in _nonbaseline_levels(self.levels, t)]
        order = [sub.param_index[(relabel[t], lv)] for t in relabel
                 for lv in _nonbaseline_levels(self.levels, t)]
        out = np.empty(sub.dim, dtype=int)
        out[order] = index
        return sub, out

    def graph(self) -> Graph:
        """Interaction graph: an edge for every two-way term."""
        edges = [bits(t) for t in self.terms if popcount(t) == 2]
        return Graph.from_edges(self.names, edges)

    def is_graphical(self) -> bool:
        return self.term_set == frozenset(complete_subsets(self.graph()))

    def is_decomposable(self) -> bool:
        return self.is_graphical() and is_decomposable(self.graph())

    def formula(self) -> str:
        return format_formula(self.generators, self.names)

    def __str__(self) -> str:
        return self.formula()


def downward_closure(gens: Iterable[int], levels: Sequence[int],
                     names: Sequence[str] = ()) -> InteractionSet:
    """Smallest model containing every generator and every main effect."""
    n = len(levels)
    full = (1 << n) - 1
    terms = {1 << v for v in range(n)}
    for g in gens:
        if g <= 0 or g & ~full:
            raise DomainError(f"generator {g} mentions an unknown variable")
        sub = g
        while sub:
            terms.add(sub)
            sub = (sub - 1) & g
    return InteractionSet(tuple(levels), tuple(terms), tuple(names))


def saturated(levels: Sequence[int], names: Sequence[str] = ()) -> InteractionSet:
    return downward_closure([(1 << len(levels)) - 1], levels, names)


def graphical_interactions(g: Graph, levels: Sequence[int] | None = None) -> InteractionSet:
    """All nonempty complete subsets of ``g`` (binary variables by default)."""
    levels = tuple(levels) if levels is not None else (2,) * g.n
    if len(levels) != g.n:
        raise DomainError("levels do not match the graph's vertices")
    return InteractionSet(levels, tuple(complete_subsets(g)), g.names)


def generators(iset: InteractionSet) -> tuple[int, ...]:
    """Inclusion-maximal terms."""
    terms = iset.terms
    return tuple(t for t in terms if not any(u != t and u & t == t for u in terms))


def dual_generators(iset: InteractionSet) -> tuple[int, ...]:
    """Inclusion-minimal nonempty subsets of the variables absent from the model."""
    present = iset.term_set
    out = set()
    for base in (0,) + iset.terms:
        for v in range(iset.nvars):
            cand = base | (1 << v)
            if cand == base or cand in present or cand in out:
                continue
            if all((cand & ~(1 << u)) in present for u in bits(cand) if cand & ~(1 << u)):
                out.add(cand)
    return tuple(sorted(out, key=mask_key))


def subset_sum_transform(values: np.ndarray) -> np.ndarray:
    """Zeta transform over the subset lattice.

    ``values`` is indexed by subset mask (length ``2**n``); the result holds,
    at each mask E, the sum of ``values[F]`` over all F contained in E.
    """
    out = np.array(values, dtype=float, copy=True)
    size = out.shape[0]
    n = size.bit_length() - 1
    if size != 1 << n:
        raise DomainError("length must be a power of two")
    masks = np.arange(size)
    for v in range(n):
        hi = masks[(masks >> v) & 1 == 1]
        out[hi] += out[hi ^ (1 << v)]
    return out


@lru_cache(maxsize=64)
def _binary_cell_masks(n: int) -> np.ndarray:
    """Subset mask of each cell of a binary table in lexicographic order."""
    grid = cell_grid((2,) * n)
    return grid @ (1 << np.arange(n))


def log_unnormalized(theta, iset: InteractionSet) -> np.ndarray:
    """``log p(i) - log p_0`` for every cell."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (iset.dim,):
        raise DomainError(f"theta has shape {theta.shape}, expected ({iset.dim},)")
    if iset.is_binary and iset.nvars <= 16:
        by_mask = np.zeros(1 << iset.nvars)
        by_mask[[t for t, _ in iset.params]] = theta
        return subset_sum_transform(by_mask)[_binary_cell_masks(iset.nvars)]
    return iset.design @ theta


def log_partition(theta, iset: InteractionSet) -> float:
    """``k(theta) = log(1 + sum_{i != 0} exp(sum_{F in D, F <= supp(i)} theta(i_F)))``."""
    return float(logsumexp(log_unnormalized(theta, iset)))


def log_probs_from_theta(theta, iset: InteractionSet) -> np.ndarray:
    u = log_unnormalized(theta, iset)
    logp = u - logsumexp(u)
    if not np.all(np.isfinite(logp)):
        raise NumericError("cell probabilities overflowed", theta=np.asarray(theta))
    return logp


def probs_from_theta(theta, iset: InteractionSet) -> np.ndarray:
    """Cell probabilities of the model with parameters ``theta``."""
    p = np.exp(log_probs_from_theta(theta, iset))
    if np.any(p <= 0):
        raise NumericError("cell probability underflowed to zero", theta=np.asarray(theta))
    return p


def theta_from_probs(p, iset: InteractionSet) -> np.ndarray:
    """Baseline-constrained log-linear parameters of ``p`` housed by ``iset``.

    ``theta(i_E) = sum_{F <= E} (-1)^{|E \\ F|} log p(i_F, 0)``; entries of
    terms outside the model are not returned (use :func:`saturated` to see
    them).
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != iset.ncells:
        raise DomainError(f"expected {iset.ncells} cell probabilities, got {p.shape[0]}")
    if np.any(~(p > 0)):
        raise DomainError("cell probabilities must be strictly positive")
    logp = np.log(p)
    strides = _strides(iset.levels)
    out = np.empty(iset.dim)
    for k, (t, lv) in enumerate(iset.params):
        vs = bits(t)
        size = len(vs)
        total = 0.0
        for sub in range(1 << size):
            idx = sum(lv[j] * strides[vs[j]] for j in range(size) if sub >> j & 1)
            sign = -1.0 if (size - popcount(sub)) % 2 else 1.0
            total += sign * logp[idx]
        out[k] = total
    return out


def log_likelihood(theta, table: Table, iset: InteractionSet) -> float:
    """Multinomial log-likelihood ``<theta, y> - N k(theta)`` (no multinomial coefficient)."""
    if tuple(table.levels) != iset.levels:
        raise DomainError("table and model have different variables")
    counts = np.asarray(table.counts, dtype=float)
    return float(iset.margins(counts) @ np.asarray(theta, dtype=float)
                 - counts.sum() * log_partition(theta, iset))


def term_name(mask: int, names: Sequence[str]) -> str:
    vs = [names[v] for v in bits(mask)]
    if all(len(n) == 1 for n in names):
        return "".join(vs)
    return ",".join(vs)


def format_formula(gens: Iterable[int], names: Sequence[str]) -> str:
    """Generators joined by ``|``: interactions by size, then main effects."""
    gens = list(gens)
    multi = sorted((g for g in gens if popcount(g) > 1), key=mask_key)
    single = sorted((g for g in gens if popcount(g) == 1), key=mask_key)
    return "|".join(term_name(g, names) for g in multi + single)


def parse_term(text: str, names: Sequence[str]) -> int:
    text = text.strip()
    if not text:
        raise DomainError("empty term")
    index = {n: k for k, n in enumerate(names)}
    if "," in text or not all(len(n) == 1 for n in names):
        parts = [s.strip() for s in text.split(",")]
    else:
        parts = list(text)
    mask = 0
    for part in parts:
        if part not in index:
            raise DomainError(f"unknown variable {part!r}")
        mask |= 1 << index[part]
    return mask


def parse_formula(text: str, names: Sequence[str]) -> list[int]:
    """Generator masks of a formula such as ``bc|ace|ade|f``."""
    return [parse_term(part, names) for part in text.split("|")]


def model_from_formula(text: str, levels: Sequence[int], names: Sequence[str]) -> InteractionSet:
    return downward_closure(parse_formula(text, names), levels, names)
