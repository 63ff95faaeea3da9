"""Closed-form scalar field expressions.

Grammar (conventional infix, ``^`` or ``**`` for powers, right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom (("^" | "**") unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC   := exp | ln | log | sqrt | sin | cos | tan

``pi`` is the only named constant.  A domain constraint is ``expr > expr`` or
``expr < expr``; it is stored as a single expression that must be positive.

Expressions evaluate either on floats (numpy) or on :class:`~bihol.jets.Jet`
coordinates, in which case derivatives come out of the truncated-series
arithmetic and never from rewriting the tree.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jets
from .errors import ExpressionError, JetDomainError
from .jets import Jet

FUNCTIONS = ("exp", "ln", "log", "sqrt", "sin", "cos", "tan")

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base node.  Supports ``+ - * / **`` with numbers and other nodes."""

    precedence = _PREC_ATOM

    def __add__(self, other):
        other = as_expr(other)
        if _is_const(other, 0):
            return self
        if _is_const(self, 0):
            return other
        return Add(self, other)

    def __radd__(self, other):
        return as_expr(other) + self

    def __sub__(self, other):
        other = as_expr(other)
        if _is_const(other, 0):
            return self
        if _is_const(self, 0):
            return -other
        return Sub(self, other)

    def __rsub__(self, other):
        return as_expr(other) - self

    def __mul__(self, other):
        other = as_expr(other)
        if _is_const(self, 0) or _is_const(other, 0):
            return Const(0.0)
        if _is_const(other, 1):
            return self
        if _is_const(self, 1):
            return other
        if _is_const(other, -1):
            return -self
        if _is_const(self, -1):
            return -other
        return Mul(self, other)

    def __rmul__(self, other):
        return as_expr(other) * self

    def __truediv__(self, other):
        other = as_expr(other)
        if _is_const(other, 1):
            return self
        if _is_const(self, 0):
            return Const(0.0)
        return Div(self, other)

    def __rtruediv__(self, other):
        return as_expr(other) / self

    def __pow__(self, other):
        other = as_expr(other)
        if _is_const(other, 1):
            return self
        if _is_const(other, 0):
            return Const(1.0)
        return Pow(self, other)

    def __neg__(self):
        if isinstance(self, Const):
            return Const(-self.value)
        if isinstance(self, Neg):
            return self.arg
        return Neg(self)

    def symbols(self) -> set:
        out = set()
        _collect_symbols(self, out)
        return out

    def is_constant(self) -> bool:
        return not self.symbols()

    def __repr__(self):
        return f"Expr({to_text(self)!r})"

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=False)
class Var(Expr):
    name: str
    index: int


@dataclass(frozen=True, eq=True, repr=False)
class Neg(Expr):
    arg: Expr
    precedence = _PREC_NEG


@dataclass(frozen=True, eq=True, repr=False)
class Add(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_ADD


@dataclass(frozen=True, eq=True, repr=False)
class Sub(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_ADD


@dataclass(frozen=True, eq=True, repr=False)
class Mul(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_MUL


@dataclass(frozen=True, eq=True, repr=False)
class Div(Expr):
    left: Expr
    right: Expr
    precedence = _PREC_MUL


@dataclass(frozen=True, eq=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: Expr
    precedence = _PREC_POW


@dataclass(frozen=True, eq=True, repr=False)
class Func(Expr):
    name: str
    arg: Expr


def _is_const(e, v) -> bool:
    return isinstance(e, Const) and e.value == v


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return Const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def _collect_symbols(e, out):
    if isinstance(e, Var):
        out.add(e.name)
    for child in _children(e):
        _collect_symbols(child, out)


def _children(e):
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base, e.exponent)
    if isinstance(e, (Neg, Func)):
        return (e.arg,)
    return ()


def func(name: str, arg) -> Expr:
    if name not in FUNCTIONS:
        raise ExpressionError(f"unknown function {name!r}")
    return Func("ln" if name == "log" else name, as_expr(arg))


def exp(x):
    return func("exp", x)


def ln(x):
    return func("ln", x)


def sqrt(x):
    return func("sqrt", x)


def sin(x):
    return func("sin", x)


def cos(x):
    return func("cos", x)


def tan(x):
    return func("tan", x)


# ---------------------------------------------------------------- printing
def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_text(e: Expr) -> str:
    """Serialize to text that :func:`parse` reads back to an equal tree."""
    if isinstance(e, Const):
        s = _fmt_number(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _PREC_NEG, strict=False)
    if isinstance(e, Pow):
        # right-associative: the base needs parens at equal precedence
        return f"{_wrap(e.base, _PREC_POW, strict=True)}^{_wrap(e.exponent, _PREC_NEG, strict=False)}"
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    left = _wrap(e.left, e.precedence, strict=False)
    right = _wrap(e.right, e.precedence, strict=True)
    spaced = f" {op} " if op in "+-" else op
    return f"{left}{spaced}{right}"


def _wrap(e, prec, strict):
    s = to_text(e)
    p = e.precedence
    if isinstance(e, Const) and e.value < 0:
        return s
    if p < prec or (strict and p == prec):
        return f"({s})"
    return s


# ----------------------------------------------------------------- parsing
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|>=|<=|[-+*/^()<>]))"
)


class _Parser:
    def __init__(self, text: str, symbols: Sequence[str]):
        self.text = text
        self.symbols = {name: i for i, name in enumerate(symbols)}
        self.tokens = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ExpressionError("unexpected character", text, pos)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, pos = self.take()
        if val != op:
            raise ExpressionError(f"expected {op!r}", self.text, pos)

    def error(self, msg):
        raise ExpressionError(msg, self.text, self.peek()[2])

    def parse_expr(self):
        node = self.parse_term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.parse_term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.parse_unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def parse_unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            arg = self.parse_unary()
            if val == "+":
                return arg
            # fold "-<number>" so that negative constants print and reparse identically
            return Const(-arg.value) if isinstance(arg, Const) else Neg(arg)
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return Pow(base, self.parse_unary())
        return base

    def parse_atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.parse_expr()
                self.expect(")")
                return func(val, arg)
            if val in self.symbols:
                return Var(val, self.symbols[val])
            if val == "pi":
                return Const(math.pi)
            raise ExpressionError(f"unknown symbol {val!r}", self.text, pos)
        if val == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ExpressionError("unexpected token" if kind != "end" else "unexpected end of input",
                              self.text, pos)


def parse(text: str, symbols: Sequence[str]) -> Expr:
    """Parse an infix expression over the given coordinate names."""
    if isinstance(text, Expr):
        return text
    if isinstance(text, (int, float)):
        return Const(float(text))
    p = _Parser(str(text), symbols)
    node = p.parse_expr()
    if p.peek()[0] != "end":
        p.error("trailing input")
    return node


def parse_constraint(text: str, symbols: Sequence[str]) -> Expr:
    """Parse ``a > b`` or ``a < b`` into an expression that must stay positive."""
    p = _Parser(str(text), symbols)
    lhs = p.parse_expr()
    kind, op, pos = p.take()
    if op not in (">", "<", ">=", "<="):
        raise ExpressionError("expected a comparison '>' or '<'", text, pos)
    rhs = p.parse_expr()
    if p.peek()[0] != "end":
        p.error("trailing input")
    return Sub(lhs, rhs) if op in (">", ">=") else Sub(rhs, lhs)


# -------------------------------------------------------------- evaluation
def _const_value(e: Expr) -> float:
    return float(evaluate(e, []))


def evaluate(e: Expr, point):
    """Evaluate on plain numbers; ``point`` indexed by ``Var.index``."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return point[e.index]
    if isinstance(e, Neg):
        return -evaluate(e.arg, point)
    if isinstance(e, Add):
        return evaluate(e.left, point) + evaluate(e.right, point)
    if isinstance(e, Sub):
        return evaluate(e.left, point) - evaluate(e.right, point)
    if isinstance(e, Mul):
        return evaluate(e.left, point) * evaluate(e.right, point)
    if isinstance(e, Div):
        d = evaluate(e.right, point)
        if np.any(np.asarray(d) == 0):
            raise JetDomainError("division by zero")
        return evaluate(e.left, point) / d
    if isinstance(e, Pow):
        b = evaluate(e.base, point)
        p = evaluate(e.exponent, point)
        if not float(p).is_integer() and np.any(np.asarray(b) <= 0):
            raise JetDomainError("non-integer power of non-positive value")
        return b ** (int(p) if float(p).is_integer() else p)
    if isinstance(e, Func):
        x = evaluate(e.arg, point)
        if e.name in ("ln", "sqrt") and np.any(np.asarray(x) <= 0):
            raise JetDomainError(f"{e.name} of non-positive value")
        return {"exp": np.exp, "ln": np.log, "sqrt": np.sqrt, "sin": np.sin,
                "cos": np.cos, "tan": np.tan}[e.name](x)
    raise TypeError(f"unknown node {type(e).__name__}")


def eval_field(e: Expr, coords: Sequence[Jet]) -> Jet:
    """Evaluate an expression on coordinate jets (truncated-series composition)."""
    coords = list(coords)
    if not coords:
        raise ValueError("eval_field needs at least one coordinate jet")
    dim, order = coords[0].dim, coords[0].order
    if any(c.dim != dim or c.order != order for c in coords):
        raise ValueError("coordinate jets must share (dim, order)")
    return _eval_jet(e, coords, dim, order, {})


def _eval_jet(e, coords, dim, order, memo):
    key = id(e)
    if key in memo:
        return memo[key][1]
    if isinstance(e, Const):
        out = Jet.constant(e.value, dim, order)
    elif isinstance(e, Var):
        if e.index >= len(coords):
            raise ExpressionError(f"symbol {e.name!r} has no coordinate jet")
        out = coords[e.index]
    elif isinstance(e, Neg):
        out = -_eval_jet(e.arg, coords, dim, order, memo)
    elif isinstance(e, (Add, Sub, Mul, Div)):
        a = _eval_jet(e.left, coords, dim, order, memo)
        if isinstance(e, Div) and e.right.is_constant():
            d = _const_value(e.right)
            if d == 0:
                raise JetDomainError("division by zero constant")
            out = a / d
        else:
            b = _eval_jet(e.right, coords, dim, order, memo)
            if isinstance(e, Add):
                out = a + b
            elif isinstance(e, Sub):
                out = a - b
            elif isinstance(e, Mul):
                out = a * b
            else:
                out = a / b
    elif isinstance(e, Pow):
        base = _eval_jet(e.base, coords, dim, order, memo)
        if not e.exponent.is_constant():
            # a^b = exp(b ln a)
            ex = _eval_jet(e.exponent, coords, dim, order, memo)
            out = jets.exp(ex * jets.log(base))
        else:
            p = _const_value(e.exponent)
            out = base ** (int(p) if p.is_integer() else p)
    elif isinstance(e, Func):
        a = _eval_jet(e.arg, coords, dim, order, memo)
        if e.name == "tan":
            out = jets.sin(a) / jets.cos(a)
        else:
            out = {"exp": jets.exp, "ln": jets.log, "sqrt": jets.sqrt,
                   "sin": jets.sin, "cos": jets.cos}[e.name](a)
    else:
        raise TypeError(f"unknown node {type(e).__name__}")
    memo[key] = (e, out)
    return out


def eval_many(exprs, coords: Sequence[Jet]) -> Jet:
    """Evaluate a nested list (any rectangular shape) of expressions into one jet."""
    arr = np.asarray(exprs, dtype=object)
    flat = [eval_field(e, coords) for e in arr.ravel()]
    out = Jet.stack(flat)
    return out.reshape(arr.shape)
