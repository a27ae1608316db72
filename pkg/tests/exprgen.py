"""Random smooth expressions for property tests.

Every generated expression is smooth and well defined on [-1, 1]^3 in the
variables x, y, z: logs, square roots and divisions only ever see arguments
of the form ``c + e^2`` with ``c >= 0.5``. Expressions that grow huge on the
box are rejected.
"""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from nullcollapse.expr import BinOp, Const, Expression, Func, Neg, Var, evaluate

VARS = ("x", "y", "z")


def _positive(e: Expression, c: float) -> Expression:
    return BinOp("+", Const(c), BinOp("^", e, Const(2)))


def _bounded(e: Expression) -> Expression:
    return Func("sin", e)


def _combine(kind: int, a: Expression, b: Expression, c: float) -> Expression:
    if kind == 0:
        return BinOp("+", a, b)
    if kind == 1:
        return BinOp("-", a, b)
    if kind == 2:
        return BinOp("*", a, b)
    if kind == 3:
        return BinOp("/", a, _positive(b, c))
    if kind == 4:
        return Func("log", _positive(a, c))
    if kind == 5:
        return Func("sqrt", _positive(a, c))
    if kind == 6:
        return Func("exp", _bounded(a))
    if kind == 7:
        return Func("cos", a)
    if kind == 8:
        return Func("tan", BinOp("*", Const(0.5), _bounded(a)))
    if kind == 9:
        return Func("sinh", _bounded(a))
    if kind == 10:
        return Func("cosh", _bounded(b))
    if kind == 11:
        return BinOp("^", a, Const(3))
    if kind == 12:
        return BinOp("^", _positive(a, c), Const(1.5))
    if kind == 13:
        return Neg(a)
    return BinOp("^", _positive(a, c), _bounded(b))


N_KINDS = 15


def is_tame(e: Expression, bound: float = 1e4) -> bool:
    """Magnitude stays below ``bound`` on a probe lattice of [-1, 1]^3.

    Finite-difference oracles lose all digits on huge values, so property
    tests skip those expressions.
    """
    axis = np.linspace(-1, 1, 5)
    mesh = np.meshgrid(axis, axis, axis, indexing="ij")
    vals = evaluate(e, {v: m.ravel() for v, m in zip(VARS, mesh)})
    return bool(np.all(np.abs(vals) < bound))


def random_expression(rng: np.random.Generator, depth: int = 4) -> Expression:
    while True:
        e = _random_expression(rng, depth)
        if is_tame(e):
            return e


def _random_expression(rng: np.random.Generator, depth: int) -> Expression:
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return Var(VARS[rng.integers(3)])
        return Const(round(float(rng.uniform(-2, 2)), 3))
    kind = int(rng.integers(N_KINDS))
    a = _random_expression(rng, depth - 1)
    b = _random_expression(rng, depth - 1)
    return _combine(kind, a, b, float(rng.uniform(0.5, 2.0)))


leaves = st.one_of(
    st.sampled_from(VARS).map(Var),
    st.floats(-2, 2, allow_nan=False).map(lambda v: Const(round(v, 3))),
)


def _extend(children):
    return st.builds(
        _combine,
        st.integers(0, N_KINDS - 1),
        children,
        children,
        st.floats(0.5, 2.0),
    )


expressions = st.recursive(leaves, _extend, max_leaves=12).filter(is_tame)

points = st.fixed_dictionaries({v: st.floats(-1, 1) for v in VARS})
