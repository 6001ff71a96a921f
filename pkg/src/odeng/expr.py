"""Small arithmetic expression language for mean and scale functions.

Grammar (lowest to highest precedence):

    expr    := term (('+' | '-') term)*        left associative
    term    := factor (('*' | '/') factor)*    left associative
    factor  := '-' factor | power
    power   := atom ('^' factor)?              right associative
    atom    := NUMBER | 't' | 'b<k>' | NAME '(' expr ')' | '(' expr ')'

Unary minus binds looser than '^', so ``-2^2`` evaluates to -4, and the
exponent itself may carry a sign (``2^-3``).  The only recognised functions
are ``exp``, ``log`` and ``sqrt``; a function call binds tighter than any
operator.  Identifiers are the time variable ``t`` and subject parameters
``b1`` ... ``bp`` (1-based).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError

__all__ = ["Expr", "parse_expression", "ExpressionError"]

_FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad = len(text) - len(stripped)
            raise ExpressionError(f"unexpected character {text[bad]!r}", bad)
        if m.group("number") is not None:
            tokens.append(_Token("number", m.group("number"), m.start("number")))
        elif m.group("name") is not None:
            tokens.append(_Token("name", m.group("name"), m.start("name")))
        else:
            tokens.append(_Token("op", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


class Expr:
    """Parsed expression; evaluate with :meth:`__call__`, print with ``str``."""

    def __call__(self, t, b=()):
        raise NotImplementedError

    def param_indices(self):
        """Set of 1-based parameter indices referenced anywhere below."""
        out = set()
        self._collect(out)
        return out

    def _collect(self, out):
        pass


@dataclass(frozen=True)
class _Num(Expr):
    value: float

    def __call__(self, t, b=()):
        return self.value

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class _Time(Expr):
    def __call__(self, t, b=()):
        return t

    def __str__(self):
        return "t"


@dataclass(frozen=True)
class _Param(Expr):
    index: int  # 1-based

    def __call__(self, t, b=()):
        return b[self.index - 1]

    def _collect(self, out):
        out.add(self.index)

    def __str__(self):
        return f"b{self.index}"


@dataclass(frozen=True)
class _Call(Expr):
    name: str
    arg: Expr

    def __call__(self, t, b=()):
        return _FUNCTIONS[self.name](self.arg(t, b))

    def _collect(self, out):
        self.arg._collect(out)

    def __str__(self):
        return f"{self.name}({self.arg})"


@dataclass(frozen=True)
class _Neg(Expr):
    arg: Expr

    def __call__(self, t, b=()):
        return -self.arg(t, b)

    def _collect(self, out):
        self.arg._collect(out)

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class _Bin(Expr):
    op: str
    left: Expr
    right: Expr

    def __call__(self, t, b=()):
        x = self.left(t, b)
        y = self.right(t, b)
        if self.op == "+":
            return x + y
        if self.op == "-":
            return x - y
        if self.op == "*":
            return x * y
        if self.op == "/":
            return x / y
        # '^' with integer exponents is routed through power so that negative
        # bases stay legal; fractional exponents of negatives produce nan and
        # are caught by the probe evaluation in the model layer.
        return np.power(x, y)

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def __str__(self):
        return f"({self.left}{self.op}{self.right})"


_PARAM_RE = re.compile(r"^b([1-9]\d*)$")


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ExpressionError("unexpected end of expression", len(self.text))
        self.i += 1
        return tok

    def expect_op(self, text):
        tok = self.take()
        if tok.kind != "op" or tok.text != text:
            raise ExpressionError(f"expected {text!r}, found {tok.text!r}", tok.pos)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExpressionError(f"trailing input {tok.text!r}", tok.pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            tok = self.peek()
            if tok and tok.kind == "op" and tok.text in "+-":
                self.take()
                node = _Bin(tok.text, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            tok = self.peek()
            if tok and tok.kind == "op" and tok.text in "*/":
                self.take()
                node = _Bin(tok.text, node, self.factor())
            else:
                return node

    def factor(self):
        tok = self.peek()
        if tok and tok.kind == "op" and tok.text == "-":
            self.take()
            return _Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok and tok.kind == "op" and tok.text == "^":
            self.take()
            return _Bin("^", base, self.factor())
        return base

    def atom(self):
        tok = self.take()
        if tok.kind == "number":
            return _Num(float(tok.text))
        if tok.kind == "name":
            if tok.text == "t":
                return _Time()
            m = _PARAM_RE.match(tok.text)
            if m:
                return _Param(int(m.group(1)))
            if tok.text in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return _Call(tok.text, arg)
            raise ExpressionError(f"unknown identifier {tok.text!r}", tok.pos)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected token {tok.text!r}", tok.pos)


def parse_expression(text):
    """Parse ``text`` into an :class:`Expr`.

    Raises :class:`ExpressionError` with a character position on any syntax
    problem.  No range checking of parameter indices happens here; the model
    layer validates them against its declared parameter count.
    """
    if not text or not text.strip():
        raise ExpressionError("empty expression", 0)
    return _Parser(text).parse()
