"""Recursive-descent parser for coefficients, operators and kernel rules.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' '-'? INT)?
    atom   := INT | IDENT | 'D' '[' IDENT ']' | '(' expr ')'

Products are compositions read left to right, so ``D[x]*x`` is ``x*D[x] + 1``.
Division and negative exponents are only allowed on order-0 operands.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

from .field import RationalFunction, VariableRegistry
from .operators import BlockMismatch, DiffOperator, op_mul

Value = Union[RationalFunction, DiffOperator]

_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_']*)|(?P<op>[-+*/^()\[\]]))")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # int, ident, op, end
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def locate(pos):
        line = max(i for i, s in enumerate(line_starts) if s <= pos)
        return line + 1, pos - line_starts[line] + 1

    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            line, col = locate(pos)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        start = m.start(kind)
        line, col = locate(start)
        tokens.append(Token(kind, m.group(kind), line, col))
        pos = m.end()
    line, col = locate(len(text))
    tokens.append(Token("end", "", line, col))
    return tokens


class LinearForm:
    """Rational-linear combination of kernel symbols (right-hand side of a rule)."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[str, RationalFunction]):
        self.terms = {s: c for s, c in terms.items() if not c.is_zero()}

    def add(self, other: "LinearForm", sign: int = 1) -> "LinearForm":
        out = dict(self.terms)
        for s, c in other.terms.items():
            c = c if sign > 0 else -c
            out[s] = out[s] + c if s in out else c
        return LinearForm(out)

    def scale(self, c: RationalFunction) -> "LinearForm":
        return LinearForm({s: c * v for s, v in self.terms.items()})


class _Parser:
    def __init__(self, text, registry, names=None, symbols=(), block=None):
        self.reg = registry
        self.tokens = tokenize(text)
        self.i = 0
        self.names = dict(names or {})
        self.symbols = set(symbols)
        self.block = block

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message, tok=None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def accept(self, text) -> Token | None:
        if self.tok.kind == "op" and self.tok.text == text:
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text) -> Token:
        t = self.accept(text)
        if t is None:
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        return t

    # -- grammar --------------------------------------------------------------

    def parse(self):
        if self.tok.kind == "end":
            raise self.error("empty expression")
        v = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return v

    def expr(self):
        v = self.term()
        while True:
            t = self.accept("+") or self.accept("-")
            if t is None:
                return v
            w = self.term()
            v = self.combine(v, w, t)

    def term(self):
        v = self.unary()
        while True:
            t = self.accept("*") or self.accept("/")
            if t is None:
                return v
            w = self.unary()
            if t.text == "*":
                v = self.multiply(v, w, t)
            else:
                if not isinstance(w, RationalFunction):
                    raise self.error("division by an operator of positive order", t)
                if w.is_zero():
                    raise self.error("division by zero", t)
                v = self.multiply(v, w.inverse(), t)

    def unary(self):
        if self.accept("-"):
            return self.negate(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        t = self.accept("^")
        if t is None:
            return base
        neg = self.accept("-") is not None
        if self.tok.kind != "int":
            raise self.error("exponent must be an integer literal")
        k = int(self.tok.text)
        self.i += 1
        if neg:
            k = -k
        if isinstance(base, LinearForm):
            raise self.error("cannot raise a kernel symbol to a power", t)
        if isinstance(base, DiffOperator):
            if k < 0:
                raise self.error("negative exponent on an operator of positive order", t)
            out = DiffOperator.identity(self.reg, base.block)
            for _ in range(k):
                out = op_mul(out, base)
            return out
        if k < 0 and base.is_zero():
            raise self.error("division by zero", t)
        return base**k

    def atom(self):
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return self.reg.const(int(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text == "D":
                self.expect("[")
                var = self.tok
                if var.kind != "ident":
                    raise self.error("expected a variable name")
                if self.reg.block_of(var.text) is None:
                    raise self.error(f"cannot differentiate by {var.text!r}", var)
                self.i += 1
                self.expect("]")
                op = DiffOperator.partial(self.reg, var.text)
                if self.block is not None and op.block != self.block:
                    raise self.error(f"D[{var.text}] does not act on the {self.block} block", var)
                return op
            if tok.text in self.symbols:
                return LinearForm({tok.text: self.reg.one})
            if tok.text in self.names:
                return self.names[tok.text]
            if tok.text in self.reg.names:
                return self.reg.var(tok.text)
            raise self.error(f"unknown identifier {tok.text!r}", tok)
        if self.accept("("):
            v = self.expr()
            self.expect(")")
            return v
        if tok.kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")

    # -- value algebra ------------------------------------------------------

    def negate(self, v):
        if isinstance(v, LinearForm):
            return v.scale(-self.reg.one)
        return -v

    def combine(self, v, w, t):
        if isinstance(v, LinearForm) or isinstance(w, LinearForm):
            if not (isinstance(v, LinearForm) and isinstance(w, LinearForm)):
                raise self.error("cannot add a kernel symbol and a coefficient", t)
            return v.add(w, 1 if t.text == "+" else -1)
        if isinstance(v, RationalFunction) and isinstance(w, RationalFunction):
            return v + w if t.text == "+" else v - w
        v, w = self.as_ops(v, w, t)
        return v + w if t.text == "+" else v - w

    def multiply(self, v, w, t):
        if isinstance(v, LinearForm) or isinstance(w, LinearForm):
            if isinstance(v, LinearForm) and isinstance(w, LinearForm):
                raise self.error("product of two kernel symbols", t)
            form, c = (v, w) if isinstance(v, LinearForm) else (w, v)
            if not isinstance(c, RationalFunction):
                raise self.error("kernel symbols can only be scaled by functions", t)
            return form.scale(c)
        if isinstance(v, RationalFunction) and isinstance(w, RationalFunction):
            return v * w
        v, w = self.as_ops(v, w, t)
        return op_mul(v, w)

    def as_ops(self, v, w, t):
        block = next(x.block for x in (v, w) if isinstance(x, DiffOperator))
        if isinstance(v, DiffOperator) and isinstance(w, DiffOperator) and v.block != w.block:
            raise self.error("operators act on different variable blocks", t)
        lift = lambda x: x if isinstance(x, DiffOperator) else DiffOperator.scalar(self.reg, block, x)
        try:
            return lift(v), lift(w)
        except BlockMismatch as exc:
            raise self.error(str(exc), t) from None


def parse_expression(text: str, registry: VariableRegistry, names: Mapping[str, Value] | None = None) -> Value:
    """Parse to a RationalFunction (order 0) or a DiffOperator."""
    v = _Parser(text, registry, names).parse()
    if isinstance(v, LinearForm):  # pragma: no cover - no symbols were declared
        raise ParseError("unexpected kernel symbol", 1, 1)
    return v


def parse_function(text: str, registry: VariableRegistry, names=None) -> RationalFunction:
    v = parse_expression(text, registry, names)
    if isinstance(v, DiffOperator):
        if not v.is_function():
            raise ParseError("expected a function, found an operator of positive order", 1, 1)
        return v.as_function()
    return v


def parse_operator(text: str, registry: VariableRegistry, block: str = "x", names=None) -> DiffOperator:
    """Parse an operator acting on ``block``; order-0 results are lifted."""
    v = _Parser(text, registry, names, block=block).parse()
    if isinstance(v, LinearForm):  # pragma: no cover
        raise ParseError("unexpected kernel symbol", 1, 1)
    if isinstance(v, RationalFunction):
        return DiffOperator.scalar(registry, block, v)
    if v.block != block:
        raise ParseError(f"operator acts on the {v.block} block, expected {block}", 1, 1)
    return v


def parse_linear_form(text: str, registry: VariableRegistry, symbols) -> dict[str, RationalFunction]:
    """Right-hand side of a kernel rule, e.g. ``(x1 + z1)*A``."""
    v = _Parser(text, registry, symbols=symbols).parse()
    if isinstance(v, RationalFunction) and v.is_zero():
        return {}
    if not isinstance(v, LinearForm):
        raise ParseError("kernel rule must be a combination of kernel symbols", 1, 1)
    return dict(v.terms)
