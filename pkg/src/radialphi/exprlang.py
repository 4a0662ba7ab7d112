"""Tiny expression language for scalar functions of one nonnegative variable.

Weights, custom nonlinearities and custom operator profiles are given in
config files as strings like ``"6/(1+r^2)"`` or ``"c*min(r, 4)"``.  An
expression has exactly one free variable (any identifier that is not a
function name and not a bound parameter); named parameters are substituted
as literals at parse time, so a parsed expression is a closed function of
its variable.

Evaluation is strict about domains: any operation that would produce a
non-finite or complex value (division by zero, ln of a nonpositive number,
negative base with fractional exponent, overflow) raises DomainError
instead of silently returning nan/inf.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "ExprError",
    "SyntaxError_",
    "NameError_",
    "ArityError",
    "DomainError",
    "parse",
]


class ExprError(ValueError):
    """Base class for expression-language failures."""


class SyntaxError_(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class NameError_(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class ArityError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class DomainError(ExprError):
    """Evaluation left the real domain or overflowed."""


# ---------------------------------------------------------------------------
# AST nodes (immutable; shared freely between threads)

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]

_FUNCTIONS = {
    "exp": 1,
    "ln": 1,
    "sqrt": 1,
    "sinh": 1,
    "asinh": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            # skip pure whitespace tail
            if source[pos:].strip() == "":
                break
            raise SyntaxError_(f"unexpected character {source[pos:].lstrip()[0]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, params: Mapping[str, float], variable: str | None):
        self.tokens = tokens
        self.i = 0
        self.params = params
        self.variable = variable

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != symbol:
            raise SyntaxError_(f"expected {symbol!r}", pos)
        return self.advance()

    def parse_expression(self) -> Node:
        node = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.parse_term())
            else:
                return node

    def parse_term(self) -> Node:
        node = self.parse_unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.parse_unary())
            else:
                return node

    def parse_unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.parse_unary())
        if kind == "op" and text == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Node:
        base = self.parse_primary()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            # right-associative; exponent may carry its own unary minus
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_primary(self) -> Node:
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "(":
            node = self.parse_expression()
            self.expect_op(")")
            return node
        if kind == "ident":
            if text in _FUNCTIONS:
                return self.parse_call(text, pos)
            if text in self.params:
                return Num(float(self.params[text]))
            if self.variable is None:
                self.variable = text
                return Var()
            if text == self.variable:
                return Var()
            raise NameError_(
                f"unknown identifier {text!r} (variable already bound to {self.variable!r})",
                pos,
            )
        raise SyntaxError_("expected a value", pos)

    def parse_call(self, name: str, pos: int) -> Node:
        self.expect_op("(")
        args = [self.parse_expression()]
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == ",":
                self.advance()
                args.append(self.parse_expression())
            else:
                break
        self.expect_op(")")
        want = _FUNCTIONS[name]
        if len(args) != want:
            raise ArityError(f"{name} takes {want} argument(s), got {len(args)}", pos)
        return Call(name, tuple(args))


def parse(source: str, params: Mapping[str, float] | None = None,
          variable: str | None = None) -> "Expr":
    """Parse ``source`` into an Expr.

    params are substituted as numeric literals.  The free variable is
    either given explicitly or inferred from the first identifier that is
    neither a function nor a parameter; a second distinct identifier is an
    error.
    """
    if not isinstance(source, str) or source.strip() == "":
        raise SyntaxError_("empty expression", 0)
    parser = _Parser(_tokenize(source), params or {}, variable)
    root = parser.parse_expression()
    kind, text, pos = parser.peek()
    if kind != "eof":
        raise SyntaxError_(f"unexpected trailing {text!r}", pos)
    return Expr(root, parser.variable or "r", source)


# ---------------------------------------------------------------------------
# Evaluation

def _check_finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{what} produced a non-finite value")
    return value


def _eval_node(node: Node, x):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_eval_node(node.operand, x)
    if isinstance(node, BinOp):
        a = _eval_node(node.left, x)
        b = _eval_node(node.right, x)
        if node.op == "+":
            return _check_finite(np.add(a, b), "addition")
        if node.op == "-":
            return _check_finite(np.subtract(a, b), "subtraction")
        if node.op == "*":
            return _check_finite(np.multiply(a, b), "multiplication")
        if node.op == "/":
            if np.any(b == 0):
                raise DomainError("division by zero")
            return _check_finite(np.divide(a, b), "division")
        if node.op == "^":
            return _eval_power(a, b)
        raise AssertionError(node.op)
    if isinstance(node, Call):
        args = [_eval_node(arg, x) for arg in node.args]
        return _eval_call(node.name, args)
    raise AssertionError(type(node))


def _eval_power(base, exponent):
    base = np.asarray(base, dtype=float)
    exponent = np.asarray(exponent, dtype=float)
    integral = np.equal(np.floor(exponent), exponent)
    if np.any((base < 0) & ~integral):
        raise DomainError("negative base with non-integer exponent")
    if np.any((base == 0) & (exponent < 0)):
        raise DomainError("zero base with negative exponent")
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.power(base, exponent)
    return _check_finite(out, "power")


def _eval_call(name: str, args):
    a = args[0]
    if name == "exp":
        with np.errstate(over="ignore"):
            return _check_finite(np.exp(a), "exp")
    if name == "ln":
        if np.any(np.asarray(a) <= 0):
            raise DomainError("ln of a nonpositive value")
        return _check_finite(np.log(a), "ln")
    if name == "sqrt":
        if np.any(np.asarray(a) < 0):
            raise DomainError("sqrt of a negative value")
        return _check_finite(np.sqrt(a), "sqrt")
    if name == "sinh":
        with np.errstate(over="ignore"):
            return _check_finite(np.sinh(a), "sinh")
    if name == "asinh":
        return _check_finite(np.arcsinh(a), "asinh")
    if name == "abs":
        return np.abs(a)
    if name == "min":
        return np.minimum(a, args[1])
    if name == "max":
        return np.maximum(a, args[1])
    raise AssertionError(name)


def _pretty(node: Node, var_name: str) -> str:
    # fully parenthesized where structure matters; reparses identically
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return var_name
    if isinstance(node, Neg):
        return f"(-{_pretty(node.operand, var_name)})"
    if isinstance(node, BinOp):
        return f"({_pretty(node.left, var_name)} {node.op} {_pretty(node.right, var_name)})"
    if isinstance(node, Call):
        inner = ", ".join(_pretty(a, var_name) for a in node.args)
        return f"{node.name}({inner})"
    raise AssertionError(type(node))


@dataclass(frozen=True)
class Expr:
    """A parsed, parameter-free expression of a single variable."""

    root: Node
    var_name: str
    source: str

    def __call__(self, x):
        """Evaluate at ``x`` (scalar or ndarray); scalar in, float out."""
        arr = np.asarray(x, dtype=float)
        out = np.asarray(_eval_node(self.root, arr), dtype=float)
        if arr.ndim == 0:
            return float(out)
        if out.shape == arr.shape:
            return out
        return np.full(arr.shape, float(out))

    def pretty(self) -> str:
        """Unambiguous text form; parse(pretty()) rebuilds the same tree."""
        return _pretty(self.root, self.var_name)
