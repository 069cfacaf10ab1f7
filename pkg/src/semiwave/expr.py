"""Analytic expression trees over complex arguments.

Grammar (precedence low to high): add/sub, mul/div, unary minus, integer
power.  Primitives are entire or meromorphic single-valued functions only;
sqrt and log are deliberately absent, so every parseable expression is
single-valued on any strip where its divisions are pole-free.  Branch points
downstream must come from eigenvalue collisions, never from coefficients.

Expressions are immutable; evaluation broadcasts over numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import ExprSyntaxError, NonFiniteValue, UnboundVariable

__all__ = [
    "Expression", "Const", "Var", "Unary", "Binary", "Power",
    "parse", "evaluate", "derivative", "pretty", "variables",
]

Number = Union[int, float, complex]


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # neg exp sin cos tanh sech
    arg: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str  # add sub mul div
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Power:
    base: "Expression"
    exponent: int


Expression = Union[Const, Var, Unary, Binary, Power]

_FUNCTIONS = ("exp", "sin", "cos", "tanh", "sech")

_UNARY_IMPL = {
    "neg": lambda z: -z,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "sech": lambda z: 1.0 / np.cosh(z),
}


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", n - len(stripped))
        if m.lastgroup == "number":
            tokens.append(("number", m.group("number"), m.start("number")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        kind, value, pos = self.peek()
        if kind != "op" or value != symbol:
            raise ExprSyntaxError(f"expected {symbol!r}", pos)
        return self.advance()

    # expr := term (('+'|'-') term)*
    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.parse_term()
                node = Binary("add" if value == "+" else "sub", node, rhs)
            else:
                return node

    # term := factor (('*'|'/') factor)*
    def parse_term(self) -> Expression:
        node = self.parse_factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                rhs = self.parse_factor()
                node = Binary("mul" if value == "*" else "div", node, rhs)
            else:
                return node

    # factor := '-' factor | power
    def parse_factor(self) -> Expression:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            inner = self.parse_factor()
            # Fold a minus applied to a literal into the constant so that
            # pretty-printed negative constants re-parse to identical trees.
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Unary("neg", inner)
        return self.parse_power()

    # power := atom ('^' INT)?   (non-associative; exponent is a literal)
    def parse_power(self) -> Expression:
        base = self.parse_atom()
        kind, value, pos = self.peek()
        if kind == "op" and value == "^":
            self.advance()
            kind2, value2, pos2 = self.peek()
            if kind2 != "number":
                raise ExprSyntaxError("exponent must be an integer literal", pos2)
            as_float = float(value2)
            if not as_float.is_integer():
                raise ExprSyntaxError("exponent must be an integer literal", pos2)
            self.advance()
            return Power(base, int(as_float))
        return base

    def parse_atom(self) -> Expression:
        kind, value, pos = self.advance()
        if kind == "number":
            return Const(complex(float(value)))
        if kind == "name":
            kind2, value2, _ = self.peek()
            if kind2 == "op" and value2 == "(":
                if value not in _FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {value!r}", pos)
                self.advance()
                arg = self.parse_expr()
                self.expect_op(")")
                return Unary(value, arg)
            return Var(value)
        if kind == "op" and value == "(":
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        raise ExprSyntaxError(f"unexpected token {value!r}" if value else "unexpected end of input", pos)


def parse(text: str) -> Expression:
    parser = _Parser(text)
    node = parser.parse_expr()
    kind, value, pos = parser.peek()
    if kind != "end":
        raise ExprSyntaxError(f"unexpected trailing token {value!r}", pos)
    return node


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _eval(node: Expression, bindings: Mapping[str, Number]):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise UnboundVariable(f"variable {node.name!r} is not bound") from None
    if isinstance(node, Unary):
        return _UNARY_IMPL[node.op](_eval(node.arg, bindings))
    if isinstance(node, Binary):
        a = _eval(node.left, bindings)
        b = _eval(node.right, bindings)
        if node.op == "add":
            return a + b
        if node.op == "sub":
            return a - b
        if node.op == "mul":
            return a * b
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.true_divide(a, b)
    if isinstance(node, Power):
        base = _eval(node.base, bindings)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.power(np.asarray(base, dtype=complex), node.exponent)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Expression, bindings: Mapping[str, Number], check: bool = True):
    """Evaluate at a point or elementwise over numpy arrays in ``bindings``."""
    out = _eval(node, bindings)
    if check and not np.all(np.isfinite(out)):
        raise NonFiniteValue(f"expression {pretty(node)!r} evaluated to a non-finite value")
    if np.ndim(out) == 0:
        return complex(out)
    return out


def variables(node: Expression) -> set:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return variables(node.arg)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Power):
        return variables(node.base)
    return set()


# ---------------------------------------------------------------------------
# Symbolic differentiation (with light constant folding)
# ---------------------------------------------------------------------------

_ZERO = Const(0j)
_ONE = Const(1 + 0j)


def _is_const(node, value=None):
    return isinstance(node, Const) and (value is None or node.value == value)


def _add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    return Binary("add", a, b)


def _sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return _neg(b)
    return Binary("sub", a, b)


def _neg(a):
    if _is_const(a):
        return Const(-a.value)
    return Unary("neg", a)


def _mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0) or _is_const(b, 0):
        return _ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    return Binary("mul", a, b)


def _div(a, b):
    if _is_const(a, 0):
        return _ZERO
    if _is_const(b, 1):
        return a
    return Binary("div", a, b)


def derivative(node: Expression, var: str) -> Expression:
    """Symbolic d/d{var}; the result is analytic wherever the input is."""
    if isinstance(node, Const):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.name == var else _ZERO
    if isinstance(node, Unary):
        inner = derivative(node.arg, var)
        if node.op == "neg":
            return _neg(inner)
        if node.op == "exp":
            return _mul(node, inner)
        if node.op == "sin":
            return _mul(Unary("cos", node.arg), inner)
        if node.op == "cos":
            return _neg(_mul(Unary("sin", node.arg), inner))
        if node.op == "tanh":
            return _mul(Power(Unary("sech", node.arg), 2), inner)
        if node.op == "sech":
            return _neg(_mul(_mul(Unary("sech", node.arg), Unary("tanh", node.arg)), inner))
        raise ValueError(f"unknown unary op {node.op!r}")
    if isinstance(node, Binary):
        da = derivative(node.left, var)
        db = derivative(node.right, var)
        if node.op == "add":
            return _add(da, db)
        if node.op == "sub":
            return _sub(da, db)
        if node.op == "mul":
            return _add(_mul(da, node.right), _mul(node.left, db))
        # quotient rule
        num = _sub(_mul(da, node.right), _mul(node.left, db))
        return _div(num, Power(node.right, 2))
    if isinstance(node, Power):
        if node.exponent == 0:
            return _ZERO
        dbase = derivative(node.base, var)
        if node.exponent == 1:
            return dbase
        lowered = Power(node.base, node.exponent - 1) if node.exponent != 2 else node.base
        return _mul(_mul(Const(complex(node.exponent)), lowered), dbase)
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Pretty printing (round-trips through parse to a structurally equal tree)
# ---------------------------------------------------------------------------

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _format_const(value: complex) -> str:
    if value.imag != 0:
        # Programmatically built complex constants have no literal syntax.
        return f"complex({value.real!r},{value.imag!r})"
    real = value.real
    if real == int(real) and abs(real) < 1e16:
        return str(int(real))
    return repr(real)


def _render(node: Expression):
    """Return (text, precedence_level)."""
    if isinstance(node, Const):
        text = _format_const(node.value)
        return text, (_LEVEL_NEG if text.startswith("-") else _LEVEL_ATOM)
    if isinstance(node, Var):
        return node.name, _LEVEL_ATOM
    if isinstance(node, Unary):
        if node.op == "neg":
            text, level = _render(node.arg)
            if level < _LEVEL_NEG:
                text = f"({text})"
            return f"-{text}", _LEVEL_NEG
        text, _ = _render(node.arg)
        return f"{node.op}({text})", _LEVEL_ATOM
    if isinstance(node, Binary):
        ltext, llevel = _render(node.left)
        rtext, rlevel = _render(node.right)
        if node.op in ("add", "sub"):
            if llevel < _LEVEL_ADD:
                ltext = f"({ltext})"
            # subtraction and trailing addition bind left; guard the rhs
            if rlevel <= _LEVEL_ADD:
                rtext = f"({rtext})"
            op = "+" if node.op == "add" else "-"
            return f"{ltext}{op}{rtext}", _LEVEL_ADD
        if llevel < _LEVEL_MUL:
            ltext = f"({ltext})"
        if rlevel <= _LEVEL_MUL:
            rtext = f"({rtext})"
        op = "*" if node.op == "mul" else "/"
        return f"{ltext}{op}{rtext}", _LEVEL_MUL
    if isinstance(node, Power):
        btext, blevel = _render(node.base)
        if blevel < _LEVEL_ATOM:
            btext = f"({btext})"
        return f"{btext}^{node.exponent}", _LEVEL_POW
    raise TypeError(f"not an expression node: {node!r}")


def pretty(node: Expression) -> str:
    return _render(node)[0]
