import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loglin.errors import DomainError
from loglin.graph import Graph, parse_graph
from loglin.model import (
    InteractionSet,
    downward_closure,
    dual_generators,
    generators,
    graphical_interactions,
    log_likelihood,
    log_partition,
    log_unnormalized,
    model_from_formula,
    parse_formula,
    probs_from_theta,
    saturated,
    subset_sum_transform,
    theta_from_probs,
)
from loglin.table import Table


def names_of(iset, masks):
    from loglin.model import term_name
    return sorted(term_name(m, iset.names) for m in masks)


@st.composite
def models(draw, max_vars=4, max_level=3):
    n = draw(st.integers(1, max_vars))
    levels = tuple(draw(st.lists(st.integers(2, max_level), min_size=n, max_size=n)))
    gens = draw(st.lists(st.integers(1, (1 << n) - 1), max_size=4))
    return downward_closure(gens, levels)


@st.composite
def model_and_theta(draw, **kw):
    iset = draw(models(**kw))
    theta = np.array(draw(st.lists(st.floats(-2, 2), min_size=iset.dim, max_size=iset.dim)))
    return iset, theta


def test_downward_closure_four_cycle():
    iset = model_from_formula("ab|bc|cd|ad", (2,) * 4, "abcd")
    assert names_of(iset, iset.terms) == sorted(["a", "b", "c", "d", "ab", "bc", "cd", "ad"])


def test_downward_closure_examples():
    iset = model_from_formula("abc", (2,) * 3, "abc")
    assert len(iset.terms) == 7
    iset = model_from_formula("ab|c", (2,) * 3, "abc")
    assert names_of(iset, iset.terms) == sorted(["a", "b", "c", "ab"])
    with pytest.raises(DomainError):
        downward_closure([8], (2, 2, 2))


def test_not_downward_closed_rejected():
    with pytest.raises(DomainError):
        InteractionSet((2, 2, 2), (1, 2, 4, 7))


def test_graphical_interactions():
    g = parse_graph("a-b,b-c,c-d,d-a")
    assert names_of(graphical_interactions(g), graphical_interactions(g).terms) == sorted(
        ["a", "b", "c", "d", "ab", "bc", "cd", "ad"])
    assert len(graphical_interactions(Graph.from_edges("ab", [])).terms) == 2
    assert len(graphical_interactions(Graph.complete("abc")).terms) == 7


def test_generators_and_duals():
    iset = model_from_formula("ab|c", (2,) * 3, "abc")
    assert names_of(iset, generators(iset)) == ["ab", "c"]
    assert names_of(iset, dual_generators(iset)) == ["ac", "bc"]
    assert dual_generators(saturated((2, 2, 2))) == ()
    iset = model_from_formula("a|b", (2, 2), "ab")
    assert names_of(iset, dual_generators(iset)) == ["ab"]


def test_dimension_formula():
    iset = model_from_formula("ab|bc", (3, 2, 4), "abc")
    assert iset.dim == 2 + 1 + 3 + 2 * 1 + 1 * 3


def test_formula_roundtrip():
    iset = model_from_formula("ace|bc|ade|f", (2,) * 6, "abcdef")
    assert iset.formula() == "bc|ace|ade|f"
    assert model_from_formula(iset.formula(), (2,) * 6, "abcdef").key == iset.key
    assert parse_formula("a,b|c", ("a", "b", "c")) == [3, 4]


def test_long_names_use_commas():
    iset = model_from_formula("smoke,mental|phys", (2, 2, 2), ("smoke", "mental", "phys"))
    assert iset.formula() == "smoke,mental|phys"


def test_theta_from_probs_two_by_two():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    theta = theta_from_probs(p, saturated((2, 2)))
    assert theta[2] == pytest.approx(np.log(0.4 * 0.1 / (0.3 * 0.2)))
    assert theta[0] == pytest.approx(np.log(0.3 / 0.1))
    assert theta[1] == pytest.approx(np.log(0.2 / 0.1))


def test_theta_uniform_is_zero():
    theta = theta_from_probs(np.full(8, 1 / 8), saturated((2, 2, 2)))
    assert np.allclose(theta, 0)


def test_probs_from_theta_two_by_two():
    iset = saturated((2, 2))
    p = probs_from_theta(np.array([np.log(2), np.log(2), 0.0]), iset)
    assert np.allclose(p, np.array([1, 2, 2, 4]) / 9)


def test_theta_zero_gives_uniform():
    iset = model_from_formula("ab|bc|cd|ad", (2,) * 4, "abcd")
    assert np.allclose(probs_from_theta(np.zeros(iset.dim), iset), 1 / 16)


def test_nonpositive_probability_rejected():
    with pytest.raises(DomainError):
        theta_from_probs(np.array([0.5, 0.5, 0.0, 0.0]), saturated((2, 2)))


@given(model_and_theta())
@settings(max_examples=100, deadline=None)
def test_roundtrip(args):
    iset, theta = args
    p = probs_from_theta(theta, iset)
    assert np.all(p > 0)
    assert abs(p.sum() - 1) < 1e-12
    assert np.allclose(theta_from_probs(p, iset), theta, atol=1e-10, rtol=0)


@given(model_and_theta(max_vars=4, max_level=2))
@settings(max_examples=50, deadline=None)
def test_model_constraints_hold(args):
    iset, theta = args
    p = probs_from_theta(theta, iset)
    full = saturated(iset.levels)
    full_theta = theta_from_probs(p, full)
    for (mask, lv), value in zip(full.params, full_theta):
        if mask not in iset.term_set:
            assert abs(value) < 1e-9


def test_four_cycle_conditional_independence():
    iset = model_from_formula("ab|bc|cd|ad", (2,) * 4, "abcd")
    theta = np.random.default_rng(1).normal(size=iset.dim)
    p = probs_from_theta(theta, iset).reshape((2,) * 4)
    # cells a=(1,0,0,0), c=(0,0,1,0), ac=(1,0,1,0)
    assert p[1, 0, 1, 0] * p[0, 0, 0, 0] == pytest.approx(p[1, 0, 0, 0] * p[0, 0, 1, 0])


def test_zeta_matches_design_matrix():
    rng = np.random.default_rng(3)
    iset = model_from_formula("abc|cd|e", (2,) * 5, "abcde")
    theta = rng.normal(size=iset.dim)
    assert np.allclose(log_unnormalized(theta, iset), iset.design @ theta)


def test_subset_sum_transform():
    v = np.zeros(8)
    v[[1, 2, 4]] = [1.0, 2.0, 3.0]
    out = subset_sum_transform(v.copy())
    assert out[7] == 6 and out[5] == 4
    ones = np.ones(8)
    ones[0] = 0
    assert subset_sum_transform(ones)[7] == 7
    rng = np.random.default_rng(0)
    x = rng.normal(size=16)
    brute = np.array([sum(x[f] for f in range(16) if f & e == f) for e in range(16)])
    assert np.allclose(subset_sum_transform(x.copy()), brute)


def test_log_likelihood():
    iset = model_from_formula("ab|c", (2, 2, 2), "abc")
    rng = np.random.default_rng(5)
    counts = rng.integers(0, 10, size=8)
    table = Table((2, 2, 2), counts)
    assert log_likelihood(np.zeros(iset.dim), table, iset) == pytest.approx(-counts.sum() * 3 * np.log(2))
    theta = rng.normal(size=iset.dim)
    p = probs_from_theta(theta, iset)
    assert log_likelihood(theta, table, iset) == pytest.approx(counts @ np.log(p), abs=1e-9)
    single = Table((2, 2), [1, 0, 0, 0])
    assert log_likelihood(np.zeros(3), single, saturated((2, 2))) == pytest.approx(-np.log(4))


def test_log_partition_stable_for_large_theta():
    iset = saturated((2, 2))
    value = log_partition(np.array([800.0, 0.0, 0.0]), iset)
    assert value == pytest.approx(800.0 + np.log(2))
