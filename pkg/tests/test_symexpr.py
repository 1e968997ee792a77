import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcms.symexpr import (Constant, DomainError, MissingAssignmentError, ParseError,
                          UndeclaredVariableError, canonical, cos, diff, evaluate, exp, is_zero,
                          parse, sin, var)

x, u, t, p, c = (var(n) for n in "xutpc")


def test_diff_examples():
    assert is_zero(diff(x * u ** 2, "u") - 2 * x * u)
    assert is_zero(diff(exp(c * t), "t") - c * exp(c * t))
    assert is_zero(diff(0.5 * p ** 2, "p") - p)
    assert is_zero(diff(Constant(7), "x"))


def test_diff_rejects_undeclared():
    with pytest.raises(UndeclaredVariableError):
        diff(x * u, "w", declared=["x", "u"])


def test_eval_examples():
    oracle = float(mpmath.exp(mpmath.mpf("0.5")))
    assert abs(evaluate(exp(0.5 * t), {"t": 1.0}) - oracle) <= 1e-9
    assert evaluate(Constant(0), {"t": 3.0}) == 0
    assert evaluate(u ** 2 - t, {"u": 2, "t": 1}) == 3


def test_eval_errors():
    with pytest.raises(MissingAssignmentError):
        evaluate(u + t, {"u": 1.0})
    with pytest.raises(DomainError):
        evaluate(u ** -1, {"u": 0.0})


def test_is_zero_examples():
    assert is_zero(u - u)
    assert is_zero(exp(t) * exp(-t) - 1)
    assert not is_zero(u ** 2 - u)
    rng = np.random.default_rng(1)
    e = exp(t) * exp(-t) - 1
    for _ in range(20):
        assert abs(evaluate(e, {"t": rng.uniform(-3, 3)})) < 1e-12


def test_transcendentals_are_independent():
    assert not is_zero(sin(x) ** 2 + cos(x) ** 2 - 1)  # conservative outside the class
    assert is_zero(sin(2 * x) - sin(x + x))
    assert is_zero(diff(sin(3 * x), "x") - 3 * cos(3 * x))


def test_parse_roundtrip_and_constants():
    e = parse("sin(2*pi*x)*exp(-t/2) - 3/(7*u^2)")
    assert is_zero(parse(str(e)) - e)
    assert abs(evaluate(parse("pi"), {}) - math.pi) < 1e-15
    with pytest.raises(ParseError):
        parse("u^0.5")
    with pytest.raises(ParseError):
        parse("log(u)")


def test_canonical_idempotent_example():
    e = (x + u) ** 3 - exp(2 * t) * (x - 1)
    once = canonical(e)
    assert str(canonical(once)) == str(once)


# --- properties -----------------------------------------------------------

NAMES = ["x", "u", "t"]


@st.composite
def polys(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        if draw(st.booleans()):
            return Constant(draw(st.integers(-4, 4)))
        return var(draw(st.sampled_from(NAMES)))
    a, b = draw(polys(depth=depth - 1)), draw(polys(depth=depth - 1))
    op = draw(st.sampled_from(["+", "-", "*", "exp", "sin"]))
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "exp":
        return a * exp(Constant(draw(st.integers(-2, 2))) * var(draw(st.sampled_from(NAMES))) / 4)
    return a * sin(var(draw(st.sampled_from(NAMES))))


points = st.fixed_dictionaries({n: st.floats(-1.5, 1.5) for n in NAMES})


@settings(max_examples=100, deadline=None)
@given(polys(), st.sampled_from(NAMES), points)
def test_derivative_matches_finite_difference(e, v, pt):
    h = 1e-6
    hi, lo = dict(pt), dict(pt)
    hi[v] += h
    lo[v] -= h
    fd = (evaluate(e, hi) - evaluate(e, lo)) / (2 * h)
    exact = evaluate(diff(e, v), pt)
    assert abs(exact - fd) <= 1e-5 * (1 + abs(exact))


@settings(max_examples=60, deadline=None)
@given(polys(), polys(), st.sampled_from(NAMES))
def test_diff_is_linear(a, b, v):
    assert is_zero(diff(a + b, v) - diff(a, v) - diff(b, v))


@settings(max_examples=60, deadline=None)
@given(polys())
def test_canonical_is_idempotent(e):
    once = canonical(e)
    assert str(canonical(once)) == str(once)
    assert is_zero(once - e)


@settings(max_examples=40, deadline=None)
@given(polys(), polys())
def test_zero_implies_small_values(a, b):
    e = (a + b) * (a - b) - (a * a - b * b)
    assert is_zero(e)
    rng = np.random.default_rng(0)
    for _ in range(50):
        pt = {n: rng.uniform(-1.5, 1.5) for n in NAMES}
        assert abs(evaluate(e, pt)) <= 1e-12 * (1 + abs(evaluate(a * a, pt)) + abs(evaluate(b * b, pt)))


@settings(max_examples=60, deadline=None)
@given(polys())
def test_print_parse_roundtrip(e):
    assert is_zero(parse(str(e)) - e)
