"""Formal words in named generators, their two realizations, and the anti-map b.

A :class:`WordPoly` is only a representative of an element of the generated
ring; equality in the ring is decided by evaluating it (``word_equal_in_B``).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .field import RationalFunction
from .operators import DiffOperator, op_mul

Word = tuple[str, ...]


class UnknownGenerator(KeyError):
    pass


@dataclass(frozen=True)
class TableEntry:
    name: str
    x_realization: DiffOperator
    dual_name: str
    z_realization: DiffOperator


class GeneratorTable:
    """Generator letters with their x-side images and the images of their duals."""

    def __init__(self, entries: Iterable[TableEntry]):
        self.entries: tuple[TableEntry, ...] = tuple(entries)
        letters = [e.name for e in self.entries] + [e.dual_name for e in self.entries]
        if len(set(letters)) != len(letters):
            raise ValueError(f"generator names and dual names must be distinct: {letters}")
        for e in self.entries:
            if e.x_realization.block != "x" or e.z_realization.block != "z":
                raise ValueError(f"entry {e.name!r}: realizations must act on x and z respectively")
        self._x = {e.name: e.x_realization for e in self.entries}
        self._z = {e.dual_name: e.z_realization for e in self.entries}
        self._partner = {e.name: e.dual_name for e in self.entries}
        self._partner.update({e.dual_name: e.name for e in self.entries})
        self._index = {e.name: i for i, e in enumerate(self.entries)}

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    @property
    def registry(self):
        return self.entries[0].x_realization.registry

    def partner(self, letter: str) -> str:
        try:
            return self._partner[letter]
        except KeyError:
            raise UnknownGenerator(letter) from None

    def realize(self, letter: str, side: str) -> DiffOperator:
        table = self._x if side == "x" else self._z
        try:
            return table[letter]
        except KeyError:
            raise UnknownGenerator(f"{letter!r} has no {side}-side realization") from None

    def index(self, name: str) -> int:
        return self._index[name]

    def extended(self, entries: Iterable[TableEntry]) -> "GeneratorTable":
        return GeneratorTable(self.entries + tuple(entries))

    def __str__(self):
        width = max((len(e.name) for e in self.entries), default=0)
        return "\n".join(
            f"{e.name:<{width}} = {e.x_realization}  <->  {e.dual_name} = {e.z_realization}" for e in self.entries
        )


def _is_zero(c) -> bool:
    return c == 0


class WordPoly:
    """Linear combination of words; coefficients are rationals or parameter functions."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Sequence[str], object] | None = None):
        clean: dict[Word, object] = {}
        for w, c in (terms or {}).items():
            w = tuple(w)
            c = clean[w] + c if w in clean else c
            clean[w] = c
        self.terms = {w: c for w, c in clean.items() if not _is_zero(c)}

    @classmethod
    def letter(cls, name: str) -> "WordPoly":
        return cls({(name,): Fraction(1)})

    @classmethod
    def one(cls) -> "WordPoly":
        return cls({(): Fraction(1)})

    @classmethod
    def word(cls, letters: Sequence[str], coefficient=1) -> "WordPoly":
        return cls({tuple(letters): coefficient})

    def letters(self) -> set[str]:
        return {a for w in self.terms for a in w}

    def __add__(self, other):
        if not isinstance(other, WordPoly):
            other = WordPoly({(): other})
        terms = dict(self.terms)
        for w, c in other.terms.items():
            terms[w] = terms[w] + c if w in terms else c
        return WordPoly(terms)

    __radd__ = __add__

    def __neg__(self):
        return WordPoly({w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, WordPoly):
            out: dict[Word, object] = {}
            for u, a in self.terms.items():
                for v, b in other.terms.items():
                    w = u + v
                    out[w] = out[w] + a * b if w in out else a * b
            return WordPoly(out)
        return WordPoly({w: c * other for w, c in self.terms.items()})

    def __rmul__(self, other):
        return WordPoly({w: other * c for w, c in self.terms.items()})

    def __pow__(self, k: int):
        out = WordPoly.one()
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, WordPoly):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms))

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for w, c in sorted(self.terms.items(), key=lambda t: (len(t[0]), t[0])):
            body = "*".join(w) if w else "1"
            if c == 1:
                parts.append(body)
            elif c == -1:
                parts.append(f"-{body}")
            else:
                parts.append(f"({c})*{body}" if w else f"({c})")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"WordPoly({self})"


def word_eval(w: WordPoly, table: GeneratorTable, side: str) -> DiffOperator:
    """Realize a WordPoly as an operator: letters multiply left to right.

    On the x side letters are generator names; on the z side they are dual names.
    """
    reg = table.registry
    prefixes: dict[Word, DiffOperator] = {(): DiffOperator.identity(reg, side)}

    def product(word: Word) -> DiffOperator:
        if word not in prefixes:
            prefixes[word] = op_mul(product(word[:-1]), table.realize(word[-1], side))
        return prefixes[word]

    total = DiffOperator.zero(reg, side)
    for word, c in sorted(w.terms.items(), key=lambda t: t[0]):
        total = total + product(word).scale(RationalFunction.coerce(reg, c))
    return total


def anti_map(w: WordPoly, table: GeneratorTable) -> WordPoly:
    """b: reverse every word and replace each letter by its partner."""
    return WordPoly({tuple(table.partner(a) for a in reversed(word)): c for word, c in w.terms.items()})


def word_equal_in_B(w1: WordPoly, w2: WordPoly, table: GeneratorTable) -> bool:
    return word_eval(w1, table, "x") == word_eval(w2, table, "x")


def ad_word(g_name: str, f_name: str, j: int) -> WordPoly:
    """Formal expansion of ad_g^j(f) with ad_g(u) = g u - u g."""
    if j < 0:
        raise ValueError("ad power must be non-negative")
    g = WordPoly.letter(g_name)
    out = WordPoly.letter(f_name)
    for _ in range(j):
        out = g * out - out * g
    return out


def monomials_to_word(monomials: Mapping[tuple[int, ...], object], letters: Sequence[str]) -> WordPoly:
    """Commutative polynomial in ``letters`` -> WordPoly, letters ascending by position."""
    terms = {}
    for exps, c in monomials.items():
        word = tuple(a for a, e in zip(letters, exps) for _ in range(e))
        terms[word] = c
    return WordPoly(terms)


def random_word_poly(rng: random.Random, letters: Sequence[str], max_length: int = 4, max_terms: int = 3) -> WordPoly:
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        word = tuple(rng.choice(letters) for _ in range(rng.randint(0, max_length)))
        terms[word] = Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.choice([1, 1, 2]))
    w = WordPoly(terms)
    return w if w.terms else WordPoly.letter(letters[0])
