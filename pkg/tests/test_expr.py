import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlayout import expr as E

unit = st.floats(0, 1)
real = st.floats(-1e3, 1e3)


@settings(max_examples=1000)
@given(real, real)
def test_mix_identities(m, f):
    assert E.evaluate(E.Mix(E.Const(0.0), E.Const(m), E.Const(f)), {}) == m
    assert E.evaluate(E.Mix(E.Const(1.0), E.Const(m), E.Const(f)), {}) == f


@settings(max_examples=1000)
@given(unit, unit, unit)
def test_mix_is_convex_combination(w, m, f):
    v = E.evaluate(E.Mix(E.Const(w), E.Const(m), E.Const(f)), {})
    assert min(m, f) - 1e-15 <= v <= max(m, f) + 1e-15


@settings(max_examples=1000)
@given(unit)
def test_margin_identities(a):
    assert E.evaluate(E.Margin(E.Const(a), E.Const(0.0)), {}) == 1.0
    assert E.evaluate(E.Margin(E.Const(a), E.Const(1.0)), {}) == a


@settings(max_examples=1000)
@given(unit, unit)
def test_margin_bounds(a, p):
    v = E.evaluate(E.Margin(E.Const(a), E.Const(p)), {})
    assert a - 1e-15 <= v <= 1.0


def test_margin_example():
    assert E.evaluate(E.Margin(E.Const(0.7), E.Const(1.0)), {}) == pytest.approx(0.7)
    assert E.evaluate(E.Margin(E.Const(0.7), E.Const(0.0)), {}) == 1.0


@settings(max_examples=1000)
@given(st.lists(st.floats(0.01, 1), min_size=1, max_size=6), st.floats(-5, 5))
def test_genmean_between_min_and_max(xs, p):
    v = E.genmean(p, xs)
    assert min(xs) * (1 - 1e-9) <= v <= max(xs) * (1 + 1e-9)


def test_genmean_special_cases():
    xs = [0.2, 0.5, 0.8]
    assert E.genmean(1, xs) == pytest.approx(np.mean(xs))
    assert E.genmean(0, xs) == pytest.approx(math.prod(xs) ** (1 / 3))
    assert E.genmean(-1, xs) == pytest.approx(3 / sum(1 / x for x in xs))


def test_logistic_stable():
    assert E.logistic(5.3) == pytest.approx(1 / (1 + math.exp(-5.3)))
    assert E.logistic(-1000.0) == 0.0
    assert E.logistic(1000.0) == 1.0


def test_operator_sugar_and_refs():
    a, b = E.Ref("a"), E.Ref("b")
    e = E.Logistic(a * 2 - b / 4) + (-a)
    assert E.refs(e) == ["a", "b"]
    env = {"a": 1.5, "b": 2.0}
    assert E.evaluate(e, env) == pytest.approx(1 / (1 + math.exp(-2.5)) - 1.5)


def test_evaluate_vectorises():
    env = {"x": np.array([0.0, 1.0, 2.0])}
    np.testing.assert_allclose(E.evaluate(E.Ref("x") * 3 + 1, env), [1, 4, 7])
