"""Integer expression parsing and evaluation for symbolic call arguments.

Expressions appear in experiment files as single whitespace-free tokens,
e.g. ``(1000-nb)`` or ``2*n*n*n``.  The grammar is deliberately small:
integer literals, variables, unary minus, ``+ - * /`` with the usual
precedence, and parentheses.  Division must be exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

Bindings = Mapping[str, int]


class ExpressionError(ValueError):
    """Raised on syntax errors, unbound variables, or inexact division."""


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"


Expression = Union[Lit, Var, Neg, BinOp]


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            raise ExpressionError(f"whitespace not allowed in expression at position {i}")
        if c.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("int", text[i:j], i))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif c in "+-*/()":
            tokens.append((c, c, i))
            i += 1
        else:
            raise ExpressionError(f"unexpected character {c!r} at position {i}")
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        if self.pos >= len(self.tokens):
            raise ExpressionError(f"unexpected end of expression {self.text!r}")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> Expression:
        expr = self.sum()
        if self.pos < len(self.tokens):
            kind, val, at = self.tokens[self.pos]
            raise ExpressionError(f"trailing {val!r} at position {at} in {self.text!r}")
        return expr

    def sum(self) -> Expression:
        node = self.product()
        while self.peek() in ("+", "-"):
            op = self.next()[0]
            node = BinOp(op, node, self.product())
        return node

    def product(self) -> Expression:
        node = self.atom()
        while self.peek() in ("*", "/"):
            op = self.next()[0]
            node = BinOp(op, node, self.atom())
        return node

    def atom(self) -> Expression:
        kind, val, at = self.next()
        if kind == "int":
            return Lit(int(val))
        if kind == "name":
            return Var(val)
        if kind == "-":
            return Neg(self.atom())
        if kind == "(":
            node = self.sum()
            kind2, val2, at2 = self.next()
            if kind2 != ")":
                raise ExpressionError(f"expected ')' at position {at2} in {self.text!r}")
            return node
        raise ExpressionError(f"unexpected {val!r} at position {at} in {self.text!r}")


def parse_expression(text: str) -> Expression:
    """Parse ``text`` into an expression tree."""
    if not text:
        raise ExpressionError("empty expression")
    return _Parser(text).parse()


def eval_expression(expr: Expression, bindings: Bindings) -> int:
    """Evaluate ``expr`` to an integer under ``bindings``."""
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Var):
        try:
            return int(bindings[expr.name])
        except KeyError:
            raise ExpressionError(f"unbound variable {expr.name!r}") from None
    if isinstance(expr, Neg):
        return -eval_expression(expr.operand, bindings)
    if isinstance(expr, BinOp):
        left = eval_expression(expr.left, bindings)
        right = eval_expression(expr.right, bindings)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            if right == 0:
                raise ExpressionError("division by zero")
            if left % right != 0:
                raise ExpressionError(f"inexact division {left}/{right}")
            return left // right
    raise TypeError(f"not an expression: {expr!r}")


def free_variables(expr: Expression) -> set[str]:
    if isinstance(expr, Lit):
        return set()
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Neg):
        return free_variables(expr.operand)
    if isinstance(expr, BinOp):
        return free_variables(expr.left) | free_variables(expr.right)
    raise TypeError(f"not an expression: {expr!r}")


def evaluate(text: str, bindings: Bindings | None = None) -> int:
    """Parse and evaluate in one step."""
    return eval_expression(parse_expression(text), bindings or {})
