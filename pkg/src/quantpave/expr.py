"""Arithmetic expression trees over named variables.

The term language has +, -, * (binary), unary negation, decimal rational
constants and variables.  Interval evaluation is the natural interval
extension: each operation is replaced by its outward-rounded interval
counterpart, which yields a guaranteed overestimation of the range.
Division and transcendental functions are deliberately absent.

Grammar accepted by :func:`parse_expr`::

    expr   := term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := NUMBER | IDENT | '-' factor | '(' expr ')'

NUMBER is a decimal literal (``3``, ``0.25``); IDENT starts with a letter
or underscore.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import ExprParseError
from .intervals import Box, Interval, _next_down, _next_up


def _enclose(value: Fraction) -> Interval:
    """Smallest float interval containing the exact rational `value`."""
    f = float(value)
    if math.isinf(f):
        return Interval(-math.inf, math.inf)
    exact = Fraction(f)
    if exact == value:
        return Interval(f, f)
    if exact < value:
        return Interval(f, _next_up(f))
    return Interval(_next_down(f), f)


class Expr:
    """Base class for expression nodes.  Nodes are immutable."""

    __slots__ = ()

    def eval_point(self, env: Mapping[str, float]) -> float:
        raise NotImplementedError

    def eval_interval(self, env: Mapping[str, Interval]) -> Interval:
        raise NotImplementedError

    def free_vars(self) -> frozenset[str]:
        raise NotImplementedError

    def substitute(self, mapping: Mapping[str, "Expr"]) -> "Expr":
        """Replace variables by expressions (capture is the caller's concern)."""
        raise NotImplementedError

    def node_count(self) -> int:
        raise NotImplementedError

    def to_text(self) -> str:
        return self._text(0)

    def _text(self, parent_prec: int) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True, slots=True)
class Const(Expr):
    """Rational constant.  Decimal literals are stored exactly."""

    value: Fraction
    _enclosure: Interval = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))
        object.__setattr__(self, "_enclosure", _enclose(self.value))

    def eval_point(self, env: Mapping[str, float]) -> float:
        return float(self.value)

    def eval_interval(self, env: Mapping[str, Interval]) -> Interval:
        return self._enclosure

    def free_vars(self) -> frozenset[str]:
        return frozenset()

    def substitute(self, mapping: Mapping[str, Expr]) -> Expr:
        return self

    def node_count(self) -> int:
        return 1

    def _text(self, parent_prec: int) -> str:
        return _format_rational(self.value)


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str

    def eval_point(self, env: Mapping[str, float]) -> float:
        return env[self.name]

    def eval_interval(self, env: Mapping[str, Interval]) -> Interval:
        return env[self.name]

    def free_vars(self) -> frozenset[str]:
        return frozenset((self.name,))

    def substitute(self, mapping: Mapping[str, Expr]) -> Expr:
        return mapping.get(self.name, self)

    def node_count(self) -> int:
        return 1

    def _text(self, parent_prec: int) -> str:
        return self.name


def _wrap(text: str, prec: int, parent_prec: int) -> str:
    return f"({text})" if prec < parent_prec else text


@dataclass(frozen=True, slots=True)
class Add(Expr):
    lhs: Expr
    rhs: Expr

    def eval_point(self, env: Mapping[str, float]) -> float:
        return self.lhs.eval_point(env) + self.rhs.eval_point(env)

    def eval_interval(self, env: Mapping[str, Interval]) -> Interval:
        return self.lhs.eval_interval(env) + self.rhs.eval_interval(env)

    def free_vars(self) -> frozenset[str]:
        return self.lhs.free_vars() | self.rhs.free_vars()

    def substitute(self, mapping: Mapping[str, Expr]) -> Expr:
        return Add(self.lhs.substitute(mapping), self.rhs.substitute(mapping))

    def node_count(self) -> int:
        return 1 + self.lhs.node_count() + self.rhs.node_count()

    def _text(self, parent_prec: int) -> str:
        # Right operand gets parens at equal precedence: the parser is
        # left-associative, so "a + (b + c)" must keep its grouping.
        text = f"{self.lhs._text(1)} + {self.rhs._text(2)}"
        return _wrap(text, 1, parent_prec)


@dataclass(frozen=True, slots=True)
class Sub(Expr):
    lhs: Expr
    rhs: Expr

    def eval_point(self, env: Mapping[str, float]) -> float:
        return self.lhs.eval_point(env) - self.rhs.eval_point(env)

    def eval_interval(self, env: Mapping[str, Interval]) -> Interval:
        return self.lhs.eval_interval(env) - self.rhs.eval_interval(env)

    def free_vars(self) -> frozenset[str]:
        return self.lhs.free_vars() | self.rhs.free_vars()

    def substitute(self, mapping: Mapping[str, Expr]) -> Expr:
        return Sub(self.lhs.substitute(mapping), self.rhs.substitute(mapping))

    def node_count(self) -> int:
        return 1 + self.lhs.node_count() + self.rhs.node_count()

    def _text(self, parent_prec: int) -> str:
        text = f"{self.lhs._text(1)} - {self.rhs._text(2)}"
        return _wrap(text, 1, parent_prec)


@dataclass(frozen=True, slots=True)
class Mul(Expr):
    lhs: Expr
    rhs: Expr

    def eval_point(self, env: Mapping[str, float]) -> float:
        return self.lhs.eval_point(env) * self.rhs.eval_point(env)

    def eval_interval(self, env: Mapping[str, Interval]) -> Interval:
        return self.lhs.eval_interval(env) * self.rhs.eval_interval(env)

    def free_vars(self) -> frozenset[str]:
        return self.lhs.free_vars() | self.rhs.free_vars()

    def substitute(self, mapping: Mapping[str, Expr]) -> Expr:
        return Mul(self.lhs.substitute(mapping), self.rhs.substitute(mapping))

    def node_count(self) -> int:
        return 1 + self.lhs.node_count() + self.rhs.node_count()

    def _text(self, parent_prec: int) -> str:
        text = f"{self.lhs._text(2)} * {self.rhs._text(3)}"
        return _wrap(text, 2, parent_prec)


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    operand: Expr

    def eval_point(self, env: Mapping[str, float]) -> float:
        return -self.operand.eval_point(env)

    def eval_interval(self, env: Mapping[str, Interval]) -> Interval:
        return -self.operand.eval_interval(env)

    def free_vars(self) -> frozenset[str]:
        return self.operand.free_vars()

    def substitute(self, mapping: Mapping[str, Expr]) -> Expr:
        return Neg(self.operand.substitute(mapping))

    def node_count(self) -> int:
        return 1 + self.operand.node_count()

    def _text(self, parent_prec: int) -> str:
        return _wrap(f"-{self.operand._text(3)}", 3, parent_prec)


def _format_rational(value: Fraction) -> str:
    """Exact decimal text for rationals with 2^a*5^b denominators."""
    if value < 0:
        return "-" + _format_rational(-value)
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    twos = fives = 0
    d = den
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        raise ValueError(f"rational {value} has no exact decimal form")
    k = max(twos, fives)
    digits = num * 10**k // den
    text = str(digits).rjust(k + 1, "0")
    return f"{text[:-k]}.{text[-k:]}"


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d+|\.\d+|\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[+\-*()])|(?P<bad>\S))"
)


class _Parser:
    def __init__(self, text: str, declared: frozenset[str]):
        self.text = text
        self.declared = declared
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                break
            if m.group("bad") is not None:
                bad = m.group("bad")
                if bad == "/":
                    raise ExprParseError("division is not supported", m.start("bad"))
                raise ExprParseError(f"unexpected character {bad!r}", m.start("bad"))
            for kind in ("number", "ident", "op"):
                if m.group(kind) is not None:
                    self.tokens.append((kind, m.group(kind), m.start(kind)))
                    break
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, value, pos = self.peek()
        if kind != "op" or value != op:
            raise ExprParseError(f"expected {op!r}", pos)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprParseError(f"unexpected token {value!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                rhs = self.term()
                e = Add(e, rhs) if value == "+" else Sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == "*":
                self.advance()
                e = Mul(e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        kind, value, pos = self.advance()
        if kind == "number":
            return Const(Fraction(value))
        if kind == "ident":
            if value not in self.declared:
                raise ExprParseError(f"undeclared variable {value!r}", pos)
            return Var(value)
        if kind == "op" and value == "-":
            inner = self.factor()
            if isinstance(inner, Const):
                # Fold so that "-3" round-trips as a single constant node.
                return Const(-inner.value)
            return Neg(inner)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprParseError(f"unexpected token {value!r}" if value else "unexpected end of input", pos)


def parse_expr(text: str, declared_vars: Sequence[str]) -> Expr:
    """Parse `text` against the grammar, checking every variable against
    `declared_vars`.

    Raises ExprParseError with a character position on syntax errors,
    undeclared variables, and division."""
    return _Parser(text, frozenset(declared_vars)).parse()


class VecExpr:
    """Fixed-length vector of expressions sharing one input scope."""

    __slots__ = ("components", "output_names")

    def __init__(self, components: Sequence[Expr], output_names: Sequence[str]):
        components = tuple(components)
        output_names = tuple(output_names)
        if not components:
            raise ValueError("vector expression needs at least one component")
        if len(components) != len(output_names):
            raise ValueError(
                f"{len(components)} components but {len(output_names)} output names"
            )
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "output_names", output_names)

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("VecExpr is immutable")

    @property
    def dim(self) -> int:
        return len(self.components)

    def free_vars(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for c in self.components:
            out |= c.free_vars()
        return out

    def substitute(self, mapping: Mapping[str, Expr]) -> "VecExpr":
        return VecExpr(
            tuple(c.substitute(mapping) for c in self.components), self.output_names
        )

    def eval_point(self, env: Mapping[str, float]) -> tuple[float, ...]:
        return tuple(c.eval_point(env) for c in self.components)

    def __repr__(self) -> str:
        parts = ", ".join(
            f"{n}={c.to_text()}" for n, c in zip(self.output_names, self.components)
        )
        return f"VecExpr({parts})"


def range_over(f: VecExpr, env: Mapping[str, Interval]) -> Box:
    """Componentwise natural interval extension: a box overestimating the
    image of `f` over `env`."""
    return Box(
        f.output_names, tuple(c.eval_interval(env) for c in f.components)
    )
