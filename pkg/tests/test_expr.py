import math

import numpy as np
import pytest
from hypothesis import given, settings

from exprgen import expressions, points, random_expression
from nullcollapse.expr import (
    Const,
    DomainError,
    ExprError,
    ParseError,
    UnboundVariableError,
    Var,
    differentiate,
    evaluate,
    evaluate_many,
    parse,
    simplify,
    substitute,
    to_string,
)


def central_difference(e, var, point, step=1e-4):
    """Five-point stencil, truncation error O(step^4)."""

    def at(k):
        p = dict(point)
        p[var] += k * step
        return evaluate(e, p)

    return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * step)


# parse -------------------------------------------------------------------


def test_parse_identity():
    assert evaluate(parse("t"), {"t": 3}) == 3


def test_parse_mixed_expression():
    assert evaluate(parse("2*t + sin(x)^2"), {"t": 1, "x": 0}) == 2


def test_unbalanced_parenthesis_reports_offset():
    with pytest.raises(ParseError) as info:
        parse("sin(x")
    assert info.value.offset == 5


def test_unknown_function():
    with pytest.raises(ParseError, match="unknown function 'foo'"):
        parse("foo(x)")


@pytest.mark.parametrize(
    "source, offset",
    [("1 +", 3), ("x $ y", 2), ("(x))", 3), ("", 0), ("2 3", 2)],
)
def test_syntax_error_offsets(source, offset):
    with pytest.raises(ParseError) as info:
        parse(source)
    assert info.value.offset == offset


@pytest.mark.parametrize(
    "source, value",
    [
        ("2^3^2", 512.0),  # right associative
        ("-2^2", -4.0),  # ^ binds tighter than unary minus
        ("2*-3", -6.0),
        ("2^-1", 0.5),
        ("1 - 2 - 3", -4.0),
        ("8 / 4 / 2", 1.0),
        ("1 + 2 * 3", 7.0),
        ("-(1 + 2) * 3", -9.0),
        ("  pi ", math.pi),
        ("1.5e2 + .5", 150.5),
        ("cosh(0) + sinh(0) + tan(0) + exp(0) + log(1) + sqrt(4)", 4.0),
    ],
)
def test_precedence(source, value):
    assert evaluate(parse(source), {}) == pytest.approx(value, rel=1e-15)


# evaluate ----------------------------------------------------------------


def test_evaluate_constant():
    assert evaluate(Const(7), {"anything": 1.0}) == 7


def test_evaluate_exp_zero():
    assert evaluate(parse("exp(0)"), {}) == 1


def test_evaluate_arithmetic():
    assert evaluate(parse("t*psi^2"), {"t": 2, "psi": 3}) == 18


def test_unbound_variable():
    with pytest.raises(UnboundVariableError, match="'y'"):
        evaluate(parse("x + y"), {"x": 1.0})


@pytest.mark.parametrize(
    "source, binding",
    [
        ("log(x)", {"x": 0.0}),
        ("log(x)", {"x": -1.0}),
        ("sqrt(x)", {"x": -1e-300}),
        ("1/x", {"x": 0.0}),
        ("x^0.5", {"x": -2.0}),
        ("x^-1", {"x": 0.0}),
    ],
)
def test_domain_errors_are_loud(source, binding):
    with pytest.raises(DomainError):
        evaluate(parse(source), binding)


def test_integer_power_of_negative_base_is_fine():
    assert evaluate(parse("x^3"), {"x": -2.0}) == -8.0


def test_vectorised_evaluation():
    xs = np.linspace(0, 1, 5)
    out = evaluate(parse("x^2 + 1"), {"x": xs})
    np.testing.assert_allclose(out, xs**2 + 1)


def test_domain_error_anywhere_in_batch():
    with pytest.raises(DomainError):
        evaluate(parse("log(x)"), {"x": np.array([1.0, 2.0, 0.0])})


def test_evaluate_many_shares_subtrees():
    e = parse("sin(x)*cos(x)")
    a, b = evaluate_many([e, differentiate(e, "x")], {"x": 0.3})
    assert a == pytest.approx(math.sin(0.3) * math.cos(0.3))
    assert b == pytest.approx(math.cos(0.6))


# differentiate -----------------------------------------------------------


def test_power_rule():
    d = differentiate(parse("t*psi^2"), "psi")
    assert evaluate(d, {"t": 2, "psi": 3}) == 12


def test_sin_derivative():
    assert evaluate(differentiate(parse("sin(x)"), "x"), {"x": 0}) == 1


@pytest.mark.parametrize(
    "source, point",
    [
        ("tan(x)", {"x": 0.3}),
        ("sqrt(x)", {"x": 2.0}),
        ("log(x)", {"x": 2.0}),
        ("x^x", {"x": 1.3}),
        ("2^x", {"x": 0.7}),
        ("cosh(x)*sinh(x)", {"x": 0.4}),
        ("exp(-x^2)/(1+x^2)", {"x": 0.2}),
        ("pi*x", {"x": 1.0}),
    ],
)
def test_derivative_matches_finite_difference(source, point):
    e = parse(source)
    fd = central_difference(e, "x", point)
    sym = evaluate(differentiate(e, "x"), point)
    assert abs(sym - fd) <= 1e-6 * (1 + abs(fd))


def test_derivative_of_absent_variable_is_zero():
    assert differentiate(parse("sin(x)*y"), "z") == Const(0)


def test_random_expressions_against_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(20):
        e = random_expression(rng)
        for _ in range(20):
            p = {v: float(rng.uniform(-1, 1)) for v in "xyz"}
            for v in "xyz":
                fd = central_difference(e, v, p)
                sym = evaluate(differentiate(e, v), p)
                assert abs(sym - fd) <= 1e-6 * (1 + abs(fd)), to_string(e)


@settings(max_examples=150, deadline=None)
@given(expressions, points)
def test_derivative_property(e, p):
    for v in "xyz":
        fd = central_difference(e, v, p)
        sym = evaluate(differentiate(e, v), p)
        assert abs(sym - fd) <= 1e-6 * (1 + abs(fd))


# simplify / print --------------------------------------------------------


@pytest.mark.parametrize(
    "source, expected",
    [("0*x + y", "y"), ("1*sin(t)", "sin(t)"), ("2*3", "6"), ("x^1 - 0", "x"), ("(x+0)/1", "x")],
)
def test_simplify_examples(source, expected):
    assert simplify(parse(source)) == parse(expected)


def test_simplify_prints_folded_constant():
    assert to_string(simplify(parse("2*3"))) == "6"


@settings(max_examples=100, deadline=None)
@given(expressions)
def test_simplify_preserves_evaluation(e):
    rng = np.random.default_rng(0)
    pts = {v: rng.uniform(-1, 1, 100) for v in "xyz"}
    a = evaluate(e, pts)
    b = np.broadcast_to(evaluate(simplify(e), pts), np.shape(a))
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(expressions)
def test_print_parse_round_trip(e):
    once = parse(to_string(e))
    assert parse(to_string(once)) == once
    p = {"x": 0.1, "y": -0.2, "z": 0.3}
    assert evaluate(once, p) == pytest.approx(evaluate(e, p), rel=1e-12, abs=1e-12)


def test_substitute():
    e = substitute(parse("t*psi^2 + x"), {"t": Const(0), "x": Var("y")})
    assert e == parse("y")


def test_expressions_are_immutable_and_hashable():
    e = parse("x + 1")
    with pytest.raises(AttributeError):
        e.op = "-"
    assert len({parse("x + 1"), parse("x+1"), parse("x + 2")}) == 2


def test_unknown_constant_rejected():
    from nullcollapse.expr import NamedConst

    with pytest.raises(ExprError):
        NamedConst("e")
