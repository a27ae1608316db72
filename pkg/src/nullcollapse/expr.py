"""Analytic scalar expressions over named coordinates.

Expressions are immutable trees. Evaluation is vectorised: a binding may map
names to floats or to numpy arrays of a common broadcastable shape, which is
how whole grids of points are evaluated in one pass.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | name | name '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``, and it is
right-associative.
"""

from __future__ import annotations

import math
import re
from typing import Callable, Iterable, Mapping, Union

import numpy as np

Number = Union[float, np.ndarray]
Binding = Mapping[str, Number]

FUNCTIONS = ("sin", "cos", "tan", "sinh", "cosh", "exp", "log", "sqrt")
NAMED_CONSTANTS = {"pi": math.pi}


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ExprError):
    pass


class UnboundVariableError(EvaluationError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class DomainError(EvaluationError):
    pass


# ---------------------------------------------------------------------------
# AST nodes


class Expression:
    __slots__ = ("_hash",)

    def _key(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Expression) or type(self) is not type(other):
            return False
        if hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._key())
            object.__setattr__(self, "_hash", h)
            return h

    def __setattr__(self, name, value):
        raise AttributeError("Expression nodes are immutable")

    def __str__(self) -> str:
        return to_string(self)

    def __repr__(self) -> str:
        return f"Expression({to_string(self)!r})"

    # operator sugar used when building catalog metrics in code
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __pow__(self, other):
        return power(self, _lift(other))

    def __neg__(self):
        return neg(self)


def _init(node, **fields):
    for k, v in fields.items():
        object.__setattr__(node, k, v)


class Const(Expression):
    __slots__ = ("value",)

    def __init__(self, value: float):
        _init(self, value=float(value))

    def _key(self):
        return (self.value,)


class NamedConst(Expression):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if name not in NAMED_CONSTANTS:
            raise ExprError(f"unknown constant {name!r}")
        _init(self, name=name)

    @property
    def value(self) -> float:
        return NAMED_CONSTANTS[self.name]

    def _key(self):
        return (self.name,)


class Var(Expression):
    __slots__ = ("name",)

    def __init__(self, name: str):
        _init(self, name=name)

    def _key(self):
        return (self.name,)


class Neg(Expression):
    __slots__ = ("arg",)

    def __init__(self, arg: Expression):
        _init(self, arg=arg)

    def _key(self):
        return (self.arg,)


class BinOp(Expression):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Expression, right: Expression):
        if op not in "+-*/^":
            raise ExprError(f"unknown operator {op!r}")
        _init(self, op=op, left=left, right=right)

    def _key(self):
        return (self.op, self.left, self.right)


class Func(Expression):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expression):
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name!r}")
        _init(self, name=name, arg=arg)

    def _key(self):
        return (self.name, self.arg)


ZERO = Const(0.0)
ONE = Const(1.0)


def _lift(x) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, (int, float)):
        return Const(x)
    if isinstance(x, str):
        return parse(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Expression")


def const_value(e: Expression) -> float | None:
    if isinstance(e, (Const, NamedConst)):
        return e.value
    return None


# ---------------------------------------------------------------------------
# smart constructors: constant folding and 0/1 identities only


def add(a: Expression, b: Expression) -> Expression:
    ca, cb = const_value(a), const_value(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    ca, cb = const_value(a), const_value(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    ca, cb = const_value(a), const_value(b)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(ca * cb)
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca == -1.0:
        return neg(b)
    if cb == -1.0:
        return neg(a)
    return BinOp("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    ca, cb = const_value(a), const_value(b)
    if cb == 1.0:
        return a
    if ca == 0.0 and cb != 0.0:
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const) and cb != 0.0:
        return Const(ca / cb)
    return BinOp("/", a, b)


def power(a: Expression, b: Expression) -> Expression:
    cb = const_value(b)
    if cb == 1.0:
        return a
    if cb == 0.0:
        return ONE
    ca = const_value(a)
    if isinstance(a, Const) and isinstance(b, Const):
        try:
            return Const(_pow_scalar(ca, cb))
        except (DomainError, OverflowError):
            pass
    if ca == 1.0:
        return ONE
    return BinOp("^", a, b)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def func(name: str, a: Expression) -> Expression:
    if isinstance(a, Const):
        try:
            return Const(float(_apply_func(name, np.float64(a.value))))
        except DomainError:
            pass
    return Func(name, a)


def _pow_scalar(a: float, b: float) -> float:
    return float(_apply_pow(np.float64(a), np.float64(b)))


_BUILD = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, value, pos = self.take()
        if value != text or kind != "op":
            what = "end of input" if kind == "end" else repr(value)
            raise ParseError(f"expected {text!r}, found {what}", pos)

    def parse(self) -> Expression:
        e = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {value!r}", pos)
        return e

    def expr(self) -> Expression:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expression:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expression:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expression:
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if value not in FUNCTIONS:
                    raise ParseError(f"unknown function {value!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Func(value, arg)
            if value in NAMED_CONSTANTS:
                return NamedConst(value)
            return Var(value)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {what}", pos)


def parse(source: str) -> Expression:
    """Parse ``source`` into an expression tree (no simplification)."""
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# printing


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 or s.startswith("-") else s


def to_string(e: Expression) -> str:
    """Unambiguous serialisation; ``parse(to_string(e))`` evaluates like ``e``."""
    if isinstance(e, Const):
        return _fmt_number(e.value)
    if isinstance(e, (NamedConst, Var)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# evaluation


def _apply_func(name: str, a):
    with np.errstate(all="ignore"):
        if name == "log":
            if np.any(a <= 0):
                raise DomainError("log of non-positive value")
            return np.log(a)
        if name == "sqrt":
            if np.any(a < 0):
                raise DomainError("sqrt of negative value")
            return np.sqrt(a)
        return _UNARY[name](a)


_UNARY: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
}


def _apply_pow(a, b):
    b_arr = np.asarray(b)
    integral = np.all(b_arr == np.round(b_arr))
    if not integral and np.any(np.asarray(a) < 0):
        raise DomainError("non-integer power of negative value")
    if np.any((np.asarray(a) == 0) & (b_arr < 0)):
        raise DomainError("negative power of zero")
    with np.errstate(all="ignore"):
        if integral and b_arr.ndim == 0 and abs(float(b_arr)) <= 8:
            k = int(b_arr)
            if k == 2:
                return a * a
            if k >= 0:
                return a ** k
            return 1.0 / (a ** (-k))
        return np.power(a, b)


class _Evaluator:
    """Evaluate many expressions against one binding, sharing subtrees."""

    def __init__(self, binding: Binding):
        self.binding = binding
        self.memo: dict[int, Number] = {}
        self.keep: list[Expression] = []

    def __call__(self, e: Expression) -> Number:
        key = id(e)
        try:
            return self.memo[key]
        except KeyError:
            pass
        value = self._eval(e)
        self.memo[key] = value
        self.keep.append(e)
        return value

    def _eval(self, e: Expression) -> Number:
        if isinstance(e, Const):
            return np.float64(e.value)
        if isinstance(e, Var):
            try:
                return self.binding[e.name]
            except KeyError:
                raise UnboundVariableError(e.name) from None
        if isinstance(e, NamedConst):
            return np.float64(e.value)
        if isinstance(e, Neg):
            return -self(e.arg)
        if isinstance(e, Func):
            return _apply_func(e.name, self(e.arg))
        if isinstance(e, BinOp):
            a = self(e.left)
            b = self(e.right)
            op = e.op
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                if np.any(np.asarray(b) == 0):
                    raise DomainError("division by zero")
                return a / b
            return _apply_pow(a, b)
        raise TypeError(type(e))


def evaluate(e: Expression, binding: Binding) -> Number:
    """Evaluate ``e``; arrays in ``binding`` evaluate pointwise."""
    return _Evaluator(binding)(e)


def evaluate_many(exprs: Iterable[Expression], binding: Binding) -> list[Number]:
    ev = _Evaluator(binding)
    return [ev(e) for e in exprs]


# ---------------------------------------------------------------------------
# symbolic operations


def variables(e: Expression) -> frozenset[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            out.add(n.name)
        elif isinstance(n, Neg):
            stack.append(n.arg)
        elif isinstance(n, Func):
            stack.append(n.arg)
        elif isinstance(n, BinOp):
            stack.extend((n.left, n.right))
    return frozenset(out)


def differentiate(e: Expression, var: str) -> Expression:
    """Exact partial derivative of ``e`` with respect to ``var``."""
    return _Differentiator(var)(e)


class _Differentiator:
    def __init__(self, var: str):
        self.var = var
        self.memo: dict[int, Expression] = {}
        self.keep: list[Expression] = []

    def __call__(self, e: Expression) -> Expression:
        key = id(e)
        if key in self.memo:
            return self.memo[key]
        d = self._d(e)
        self.memo[key] = d
        self.keep.append(e)
        return d

    def _d(self, e: Expression) -> Expression:
        if isinstance(e, (Const, NamedConst)):
            return ZERO
        if isinstance(e, Var):
            return ONE if e.name == self.var else ZERO
        if isinstance(e, Neg):
            return neg(self(e.arg))
        if isinstance(e, Func):
            a = e.arg
            da = self(a)
            if const_value(da) == 0.0:
                return ZERO
            name = e.name
            if name == "sin":
                outer = func("cos", a)
            elif name == "cos":
                outer = neg(func("sin", a))
            elif name == "tan":
                outer = add(ONE, power(e, Const(2)))
            elif name == "sinh":
                outer = func("cosh", a)
            elif name == "cosh":
                outer = func("sinh", a)
            elif name == "exp":
                outer = e
            elif name == "log":
                return div(da, a)
            else:  # sqrt
                return div(da, mul(Const(2), e))
            return mul(outer, da)
        if isinstance(e, BinOp):
            a, b = e.left, e.right
            da, db = self(a), self(b)
            op = e.op
            if op == "+":
                return add(da, db)
            if op == "-":
                return sub(da, db)
            if op == "*":
                return add(mul(da, b), mul(a, db))
            if op == "/":
                return sub(div(da, b), div(mul(a, db), power(b, Const(2))))
            # power
            if self.var not in variables(b):
                if const_value(da) == 0.0:
                    return ZERO
                return mul(mul(b, power(a, sub(b, ONE))), da)
            return mul(e, add(mul(db, func("log", a)), div(mul(b, da), a)))
        raise TypeError(type(e))


def simplify(e: Expression) -> Expression:
    """Constant folding and 0/1 identity elimination, bottom-up."""
    if isinstance(e, (Const, NamedConst, Var)):
        return e
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Func):
        return func(e.name, simplify(e.arg))
    if isinstance(e, BinOp):
        return _BUILD[e.op](simplify(e.left), simplify(e.right))
    raise TypeError(type(e))


def substitute(e: Expression, mapping: Mapping[str, Expression]) -> Expression:
    """Replace variables by expressions, simplifying as the tree is rebuilt."""
    memo: dict[int, Expression] = {}
    keep: list[Expression] = []

    def go(n: Expression) -> Expression:
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Var):
            out = mapping.get(n.name, n)
        elif isinstance(n, (Const, NamedConst)):
            out = n
        elif isinstance(n, Neg):
            out = neg(go(n.arg))
        elif isinstance(n, Func):
            out = func(n.name, go(n.arg))
        else:
            out = _BUILD[n.op](go(n.left), go(n.right))
        memo[key] = out
        keep.append(n)
        return out

    return go(e)


def as_expression(x) -> Expression:
    """Coerce a number, string, or expression into an ``Expression``."""
    return _lift(x)


def count_nodes(e: Expression) -> int:
    stack = [e]
    n = 0
    while stack:
        node = stack.pop()
        n += 1
        if isinstance(node, (Neg, Func)):
            stack.append(node.arg)
        elif isinstance(node, BinOp):
            stack.extend((node.left, node.right))
    return n
