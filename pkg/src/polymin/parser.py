"""Recursive-descent parser and printer for polynomial expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor ('*' factor)*
    factor := ('-' | '+')? base ('^' uint)?
    base   := number | identifier | '(' expr ')'

Multiplication must be explicit: ``2*x*y``, never ``2xy``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Sequence

from .poly import Polynomial, grlex_key, mono_var

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_UINT = re.compile(r"\d+")
#: larger powers are almost certainly typos and would take very long to expand
MAX_EXPONENT = 1000


class ParseError(ValueError):
    """Syntax error with the byte offset where it was detected."""

    def __init__(self, message: str, offset: int, source: str = ""):
        self.message = message
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


@dataclass(frozen=True)
class ParseContext:
    variable_names: tuple
    source: str

    def __post_init__(self):
        names = self.variable_names
        if not names:
            raise ValueError("at least one variable is required")
        for v in names:
            if not _IDENT.fullmatch(v):
                raise ValueError(f"invalid variable name {v!r}")
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")


class _Parser:
    def __init__(self, ctx: ParseContext):
        self.src = ctx.source
        self.pos = 0
        self.index = {v: i for i, v in enumerate(ctx.variable_names)}
        self.n = len(ctx.variable_names)

    def error(self, msg, pos=None):
        raise ParseError(msg, self.pos if pos is None else pos, self.src)

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def parse(self) -> Polynomial:
        if not self.src.strip():
            self.error("empty expression", 0)
        p = self.expr()
        if self.peek():
            self.error(f"unexpected character {self.peek()!r}")
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek() in ("+", "-") and self.peek():
            op = self.src[self.pos]
            self.pos += 1
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.factor()
        while self.peek() == "*":
            self.pos += 1
            p = p * self.factor()
        return p

    def factor(self) -> Polynomial:
        c = self.peek()
        if c == "-":
            self.pos += 1
            return -self.factor()
        if c == "+":
            self.pos += 1
            return self.factor()
        b = self.base()
        if self.peek() == "^":
            self.pos += 1
            self.skip_ws()
            m = _UINT.match(self.src, self.pos)
            if not m:
                self.error("exponent must be an unsigned integer literal")
            end = m.end()
            if end < len(self.src) and self.src[end] in ".eE":
                self.error("exponent must be an unsigned integer literal", end)
            k = int(m.group())
            if k > MAX_EXPONENT:
                self.error(f"exponent {k} exceeds the limit {MAX_EXPONENT}")
            self.pos = end
            b = b ** k
        return b

    def base(self) -> Polynomial:
        c = self.peek()
        if not c:
            self.error("unexpected end of input")
        if c == "(":
            open_pos = self.pos
            self.pos += 1
            p = self.expr()
            if self.peek() != ")":
                self.error("unbalanced parenthesis", open_pos if not self.peek() else None)
            self.pos += 1
            return p
        m = _NUMBER.match(self.src, self.pos)
        if m:
            self.pos = m.end()
            return Polynomial.constant(float(m.group()), self.n)
        m = _IDENT.match(self.src, self.pos)
        if m:
            name = m.group()
            if name not in self.index:
                self.error(f"unknown identifier {name!r}")
            self.pos = m.end()
            return Polynomial.monomial(mono_var(self.n, self.index[name]))
        self.error(f"unexpected character {c!r}")


def parse_polynomial(text: str, variables: Sequence[str]) -> Polynomial:
    """Parse ``text`` into a :class:`Polynomial` over ``variables``.

    Raises
    ------
    ParseError
        On any syntax error, unknown identifier or bad exponent.
    """
    ctx = ParseContext(tuple(variables), text)
    return _Parser(ctx).parse()


def format_coefficient(c: float) -> str:
    if c == int(c) and abs(c) < 1e16:
        return str(int(c))
    return repr(c)


def format_monomial(m, variables: Sequence[str]) -> str:
    parts = []
    for name, e in zip(variables, m):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def format_polynomial(p: Polynomial, variables: Sequence[str]) -> str:
    """Render ``p`` in descending graded-lex order; inverse of :func:`parse_polynomial`."""
    if p.is_zero():
        return "0"
    out: List[str] = []
    for m in sorted(p.terms, key=grlex_key, reverse=True):
        c = p.coeff(m)
        neg = c < 0
        a = -c if neg else c
        mono = format_monomial(m, variables)
        if mono == "1":
            body = format_coefficient(a)
        elif a == 1.0:
            body = mono
        else:
            body = f"{format_coefficient(a)}*{mono}"
        if not out:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f"- {body}" if neg else f"+ {body}")
    return " ".join(out)
