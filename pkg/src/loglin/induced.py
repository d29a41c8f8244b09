"""The prior on cell probabilities induced by the conjugate prior on theta.

The free coordinates are the cell probabilities ``p(i(D))`` of the cells
whose nonzero coordinates sit exactly on a model term ``D`` (all other
coordinates at the baseline level). The map from those coordinates to
theta has an explicit Jacobian, which gives the induced density in closed
form up to the normalizer of the prior on theta.
"""
from __future__ import annotations

from itertools import product

import numpy as np

from .errors import DomainError
from .graph import Graph, bits, is_connected, is_decomposable, mask_key, popcount
from .model import InteractionSet, probs_from_theta, theta_from_probs
from .prior import HyperParams, log_norm_const
from .table import lexicographic_index

__all__ = [
    "f_matrix",
    "f_columns",
    "column_sign_sum",
    "nondecomposable_or_disconnected_subsets",
    "jacobian_det",
    "log_jacobian_det",
    "dirichlet_exponents",
    "induced_log_density",
    "validate_probs",
]

CONSISTENCY_TOL = 1e-8


def _support_cell(levels, mask: int, lv) -> int:
    """Flat index of the cell equal to ``lv`` on ``mask`` and 0 elsewhere."""
    cell = [0] * len(levels)
    for v, level in zip(bits(mask), lv):
        cell[v] = level
    return lexicographic_index(cell, levels)


def f_columns(iset: InteractionSet) -> list[tuple[int, tuple[int, ...]]]:
    """Column labels ``(H, j_H)`` for every nonempty ``H`` and nonzero ``j_H``."""
    n = iset.nvars
    cols = []
    for h in sorted(range(1, 1 << n), key=mask_key):
        cols.extend((h, lv) for lv in product(*(range(1, iset.levels[v]) for v in bits(h))))
    return cols


def f_matrix(iset: InteractionSet) -> np.ndarray:
    """Sign matrix with rows ``iset.params`` and columns :func:`f_columns`.

    Entry ``(C, i_C), (H, j_H)`` is ``(-1)^(|C|-1)`` when ``C <= H`` and
    ``j_H`` restricted to ``C`` equals ``i_C``, else 0.
    """
    cols = f_columns(iset)
    out = np.zeros((iset.dim, len(cols)), dtype=np.int64)
    for k, (c, ic) in enumerate(iset.params):
        sign = -1 if popcount(c) % 2 == 0 else 1
        cv = bits(c)
        for col, (h, jh) in enumerate(cols):
            if c & h != c:
                continue
            hv = bits(h)
            if all(jh[hv.index(v)] == ic[j] for j, v in enumerate(cv)):
                out[k, col] = sign
    return out


def column_sign_sum(iset: InteractionSet, h: int) -> int:
    """``sum over model terms C <= H of (-1)^(|C|-1)``."""
    return sum(1 if popcount(c) % 2 else -1 for c in iset.terms if c & h == c)


def nondecomposable_or_disconnected_subsets(graph: Graph, iset: InteractionSet | None = None
                                            ) -> list[tuple[int, int]]:
    """Subsets ``H`` whose induced subgraph is not chordal or not connected.

    Returns ``(H, a(H))`` pairs with ``a(H) = column_sign_sum(H) - 1``.
    Every other nonempty subset has ``a(H) = 0`` for graphical models.
    """
    if iset is None:
        from .model import graphical_interactions
        iset = graphical_interactions(graph)
    out = []
    for h in sorted(range(1, 1 << graph.n), key=mask_key):
        if not (is_decomposable(graph, h) and is_connected(graph, h)):
            out.append((h, column_sign_sum(iset, h) - 1))
    return out


def validate_probs(p, iset: InteractionSet) -> np.ndarray:
    """Check that ``p`` is a strictly positive table obeying the model."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != iset.ncells:
        raise DomainError(f"expected {iset.ncells} cell probabilities, got {p.size}")
    if np.any(~(p > 0)):
        raise DomainError("cell probabilities must be strictly positive")
    if abs(p.sum() - 1.0) > CONSISTENCY_TOL:
        raise DomainError("cell probabilities must sum to one")
    back = probs_from_theta(theta_from_probs(p, iset), iset)
    if np.max(np.abs(back - p)) > CONSISTENCY_TOL:
        raise DomainError("cell probabilities violate the model constraints")
    return p


def _cell_signs(iset: InteractionSet) -> np.ndarray:
    """``column_sign_sum`` of the support of every cell (0 for the baseline)."""
    sums = {}
    out = np.zeros(iset.ncells)
    for index, cell in enumerate(product(*(range(k) for k in iset.levels))):
        h = sum(1 << v for v, c in enumerate(cell) if c)
        if h:
            if h not in sums:
                sums[h] = column_sign_sum(iset, h)
            out[index] = sums[h]
    return out


def _param_cells(iset: InteractionSet) -> np.ndarray:
    return np.array([_support_cell(iset.levels, m, lv) for m, lv in iset.params], dtype=np.int64)


def log_jacobian_det(p, iset: InteractionSet, graphical: bool = False) -> float:
    """Log of the absolute Jacobian determinant ``|d p_D / d theta|``.

    The bracketed factor may be negative (e.g. ``p_0 - p(ac)`` for the
    path ``a-b-c``), so its absolute value is taken.

    ``graphical=False`` uses the general hierarchical form, summing the sign
    sums over every nonbaseline cell. ``graphical=True`` uses the form where
    only nonchordal or disconnected supports enter, with ``a(H)`` weights.
    """
    p = validate_probs(p, iset)
    log_prod = float(np.log(p[_param_cells(iset)]).sum())
    if not graphical:
        bracket = 1.0 - float(p @ _cell_signs(iset))
    else:
        if not iset.is_graphical():
            raise DomainError("graphical form needs a graphical model")
        bracket = float(p[0])
        for h, a in nondecomposable_or_disconnected_subsets(iset.graph(), iset):
            if a:
                for lv in product(*(range(1, iset.levels[v]) for v in bits(h))):
                    bracket -= a * p[_support_cell(iset.levels, h, lv)]
    if bracket == 0:
        raise DomainError("Jacobian vanishes at this point")
    return log_prod + float(np.log(abs(bracket)))


def jacobian_det(p, iset: InteractionSet, graphical: bool = False) -> float:
    return float(np.exp(log_jacobian_det(p, iset, graphical)))


def dirichlet_exponents(hp: HyperParams) -> tuple[np.ndarray, float]:
    """Exponents ``alpha(i(D))`` aligned with ``iset.params`` and ``alpha_0``.

    ``alpha(i(D))`` is the alternating sum of ``s(j_F)`` over model terms
    ``F >= D`` with ``j_F`` extending ``i_D``; ``alpha_0`` adds the signed
    sum ``(-1)^|D| s(i_D)`` to ``alpha``. Together they sum to ``alpha``.
    """
    iset = hp.iset
    expo = np.zeros(iset.dim)
    alpha0 = hp.alpha
    index = iset.param_index
    for (f, jf), value in zip(iset.params, hp.s):
        fv = bits(f)
        for keep in range(1 << len(fv)):
            sign = -1.0 if (len(fv) - popcount(keep)) % 2 else 1.0
            if keep == 0:
                alpha0 += sign * value
                continue
            d = sum(1 << fv[j] for j in range(len(fv)) if keep >> j & 1)
            jd = tuple(jf[j] for j in range(len(fv)) if keep >> j & 1)
            expo[index[(d, jd)]] += sign * value
    return expo, alpha0


def induced_log_density(p, hp: HyperParams, graphical: bool | None = None,
                        normalized: bool = True) -> float:
    """Log density of ``p_D`` induced by the prior ``(s, alpha)`` on theta.

    ``p`` is the full cell-probability table, which must obey the model.
    The value is ``sum (alpha(i(D)) - 1) log p(i(D)) + (alpha_0 - 1) log p_0
    - log K(p) - log I(s, alpha)`` with ``K = J / (p_0 prod p(i(D)))``.
    """
    iset = hp.iset
    if graphical is None:
        graphical = iset.is_graphical()
    p = validate_probs(p, iset)
    expo, alpha0 = dirichlet_exponents(hp)
    logp = np.log(p[_param_cells(iset)])
    value = float(expo @ logp) + alpha0 * float(np.log(p[0]))
    value -= log_jacobian_det(p, iset, graphical)
    if normalized:
        value -= log_norm_const(hp)
    return value
