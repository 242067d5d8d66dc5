"""Exact rational functions in the x and z coordinates over Q(parameters).

Every value is kept in canonical form: numerator and denominator are integer
polynomials with no common factor (content included) and the denominator's
leading coefficient, under graded-lex order, is positive.  Two values are
equal iff their canonical fields are identical.

Arithmetic on the underlying polynomials is delegated to python-flint's
``fmpz_mpoly``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Union

import flint

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
RESERVED = frozenset({"D"})


class RegistryMismatch(ValueError):
    """Operands live over different variable registries."""


class DenominatorVanishes(ZeroDivisionError):
    def __init__(self, denominator: "RationalFunction"):
        super().__init__(f"denominator vanishes: {denominator}")
        self.denominator = denominator


@dataclass(frozen=True)
class VariableRegistry:
    """Ordered variable names: base coordinates, dual coordinates, parameters."""

    x_vars: tuple[str, ...]
    z_vars: tuple[str, ...] = ()
    params: tuple[str, ...] = ()

    def __post_init__(self):
        for field in ("x_vars", "z_vars", "params"):
            object.__setattr__(self, field, tuple(getattr(self, field)))
        names = self.names
        if not self.x_vars:
            raise ValueError("registry needs at least one x variable")
        if len(set(names)) != len(names):
            raise ValueError(f"variable names must be distinct: {names}")
        for name in names:
            if not _IDENT.match(name) or name in RESERVED:
                raise ValueError(f"invalid variable name {name!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return self.x_vars + self.z_vars + self.params

    @cached_property
    def ctx(self):
        return flint.fmpz_mpoly_ctx.get(self.names, "deglex")

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def block_of(self, name: str) -> str | None:
        """'x' or 'z' for coordinates, None for parameters."""
        if name in self.x_vars:
            return "x"
        if name in self.z_vars:
            return "z"
        if name in self.params:
            return None
        raise KeyError(f"unknown variable {name!r}")

    def block_vars(self, block: str) -> tuple[str, ...]:
        if block == "x":
            return self.x_vars
        if block == "z":
            return self.z_vars
        raise ValueError(f"unknown block {block!r}")

    def opposite(self, block: str) -> str:
        return {"x": "z", "z": "x"}[block]

    def var(self, name: str) -> "RationalFunction":
        return RationalFunction._raw(self, self.ctx.gen(self.index(name)), self.ctx.constant(1))

    def const(self, value) -> "RationalFunction":
        return RationalFunction.coerce(self, value)

    @cached_property
    def zero(self) -> "RationalFunction":
        return RationalFunction._raw(self, self.ctx.constant(0), self.ctx.constant(1))

    @cached_property
    def one(self) -> "RationalFunction":
        return RationalFunction._raw(self, self.ctx.constant(1), self.ctx.constant(1))

    def swap_xz(self) -> list:
        """Generator images that exchange x_i and z_i (for ``compose``)."""
        if len(self.x_vars) != len(self.z_vars):
            raise ValueError("x <-> z exchange needs as many z as x variables")
        gens = list(self.ctx.gens())
        n = len(self.x_vars)
        images = list(gens)
        for i in range(n):
            images[i], images[n + i] = gens[n + i], gens[i]
        return images


Scalar = Union[int, Fraction]


_SPLIT_CACHE: dict = {}


def _radical_split(b, db, i):
    """b / gcd(b, b') and b' / gcd(b, b'), memoized per denominator.

    (a/b)' = (a' u - a v) / (b u) with u, v from this split, which keeps the
    final canonicalizing gcd far smaller than reducing against b^2.
    """
    key = (tuple(b.terms()), i)
    hit = _SPLIT_CACHE.get(key)
    if hit is None:
        h = b.gcd(db)
        hit = (b / h, db / h)
        if len(_SPLIT_CACHE) > 4096:
            _SPLIT_CACHE.clear()
        _SPLIT_CACHE[key] = hit
    return hit


class RationalFunction:
    """Quotient of two integer polynomials, held in canonical form."""

    __slots__ = ("registry", "num", "den", "_hash")

    def __init__(self, registry: VariableRegistry, num, den=None):
        ctx = registry.ctx
        if den is None:
            den = ctx.constant(1)
        if den.is_zero():
            raise ZeroDivisionError("rational function with zero denominator")
        if num.is_zero():
            num, den = ctx.constant(0), ctx.constant(1)
        elif not den.is_one():
            g = num.gcd(den)
            if not g.is_one():
                num, den = num / g, den / g
            if den.leading_coefficient() < 0:
                num, den = -num, -den
        self.registry = registry
        self.num = num
        self.den = den
        self._hash = None

    @classmethod
    def _raw(cls, registry, num, den) -> "RationalFunction":
        # caller guarantees canonical form
        self = object.__new__(cls)
        self.registry = registry
        self.num = num
        self.den = den
        self._hash = None
        return self

    @classmethod
    def coerce(cls, registry: VariableRegistry, value) -> "RationalFunction":
        if isinstance(value, RationalFunction):
            if value.registry != registry:
                raise RegistryMismatch("registry mismatch")
            return value
        if isinstance(value, bool):
            raise TypeError("bool is not a scalar")
        if isinstance(value, int):
            return cls._raw(registry, registry.ctx.constant(value), registry.ctx.constant(1))
        if isinstance(value, Fraction):
            return cls(registry, registry.ctx.constant(value.numerator), registry.ctx.constant(value.denominator))
        raise TypeError(f"cannot convert {type(value).__name__} to RationalFunction")

    @classmethod
    def from_terms(cls, registry: VariableRegistry, terms: Mapping[tuple[int, ...], Scalar]):
        """Polynomial from an exponent-vector -> rational coefficient map."""
        den = 1
        for c in terms.values():
            den = den * Fraction(c).denominator // _gcd(den, Fraction(c).denominator)
        ints = {e: int(Fraction(c) * den) for e, c in terms.items() if c != 0}
        ctx = registry.ctx
        return cls(registry, ctx.from_dict(ints) if ints else ctx.constant(0), ctx.constant(den))

    # -- structure ---------------------------------------------------------

    def _check(self, other) -> "RationalFunction":
        if isinstance(other, RationalFunction):
            if other.registry is not self.registry and other.registry != self.registry:
                raise RegistryMismatch("registry mismatch")
            return other
        return RationalFunction.coerce(self.registry, other)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_one(self) -> bool:
        return self.num.is_one() and self.den.is_one()

    def is_polynomial(self) -> bool:
        return self.den.is_constant()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def to_fraction(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not a constant")
        n = int(self.num.leading_coefficient()) if not self.num.is_zero() else 0
        return Fraction(n, int(self.den.leading_coefficient()))

    def variables(self) -> set[str]:
        names = self.registry.names
        out = set()
        for poly in (self.num, self.den):
            for i, d in enumerate(poly.degrees()):
                if d:
                    out.add(names[i])
        return out

    def depends_on_block(self, block: str) -> bool:
        return bool(self.variables() & set(self.registry.block_vars(block)))

    def degree(self, names: Iterable[str] | None = None) -> int:
        """Total degree of the numerator in the given variables (all by default)."""
        if self.num.is_zero():
            return -1
        if names is None:
            return int(self.num.total_degree())
        idx = [self.registry.index(n) for n in names]
        return max(sum(e[i] for i in idx) for e, _ in self.num.terms())

    def poly_terms(self) -> dict[tuple[int, ...], Fraction]:
        """Exponent-vector -> rational coefficient for a polynomial value."""
        if not self.is_polynomial():
            raise ValueError(f"{self} is not a polynomial")
        d = int(self.den.leading_coefficient())
        return {tuple(map(int, e)): Fraction(int(c), d) for e, c in self.num.terms()}

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        other = self._check(other)
        if other.num.is_zero():
            return self
        if self.num.is_zero():
            return other
        a, b, c, d = self.num, self.den, other.num, other.den
        if b == d:
            if b.is_one():
                return RationalFunction._raw(self.registry, a + c, b)
            return RationalFunction(self.registry, a + c, b)
        g = b.gcd(d)
        if g.is_one():
            return RationalFunction(self.registry, a * d + c * b, b * d)
        b1, d1 = b / g, d / g
        return RationalFunction(self.registry, a * d1 + c * b1, b1 * d)

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction._raw(self.registry, -self.num, self.den)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return self._check(other) + (-self)

    def __mul__(self, other):
        other = self._check(other)
        if self.num.is_zero() or other.num.is_zero():
            return self.registry.zero
        a, b, c, d = self.num, self.den, other.num, other.den
        if b.is_one() and d.is_one():
            return RationalFunction._raw(self.registry, a * c, b)
        g1 = a.gcd(d)
        g2 = c.gcd(b)
        if not g1.is_one():
            a, d = a / g1, d / g1
        if not g2.is_one():
            c, b = c / g2, b / g2
        num, den = a * c, b * d
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RationalFunction._raw(self.registry, num, den)

    __rmul__ = __mul__

    def inverse(self) -> "RationalFunction":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero")
        num, den = self.den, self.num
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RationalFunction._raw(self.registry, num, den)

    def __truediv__(self, other):
        return self * self._check(other).inverse()

    def __rtruediv__(self, other):
        return self._check(other) * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("exponent must be an integer")
        if k < 0:
            return self.inverse() ** (-k)
        return RationalFunction._raw(self.registry, self.num**k, self.den**k)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            other = RationalFunction.coerce(self.registry, other)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return self.registry == other.registry and self.num == other.num and self.den == other.den

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((tuple(self.num.terms()), tuple(self.den.terms())))
        return self._hash

    # -- calculus and substitution ----------------------------------------

    def derive(self, var: str | int) -> "RationalFunction":
        """Partial derivative by a coordinate; parameters are constants."""
        reg = self.registry
        i = var if isinstance(var, int) else reg.index(var)
        if reg.names[i] in reg.params:
            raise ValueError(f"cannot differentiate by parameter {reg.names[i]!r}")
        a, b = self.num, self.den
        if b.is_constant():
            # differentiation can enlarge the content shared with b
            return RationalFunction(reg, a.derivative(i), b)
        da = a.derivative(i)
        db = b.derivative(i)
        if db.is_zero():
            return RationalFunction(reg, da, b)
        u, v = _radical_split(b, db, i)
        return RationalFunction(reg, da * u - a * v, b * u)

    def substitute(self, assignment: Mapping[str, object]) -> "RationalFunction":
        """Replace variables by rational functions or exact numbers."""
        reg = self.registry
        values = {reg.index(k): self._check(v) for k, v in assignment.items()}
        num = _evaluate(self.num, values, reg)
        den = _evaluate(self.den, values, reg)
        if den.is_zero():
            raise DenominatorVanishes(RationalFunction._raw(reg, self.den, reg.ctx.constant(1)))
        return num / den

    def swap_xz(self) -> "RationalFunction":
        images = self.registry.swap_xz()
        return RationalFunction(self.registry, self.num.compose(*images), self.den.compose(*images))

    # -- printing ----------------------------------------------------------

    def __str__(self):
        return format_rational(self)

    def __repr__(self):
        return f"RationalFunction({self})"


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def _evaluate(poly, values: dict[int, RationalFunction], reg: VariableRegistry) -> RationalFunction:
    if all(v.den.is_one() for v in values.values()):
        gens = list(reg.ctx.gens())
        for i, v in values.items():
            gens[i] = v.num
        return RationalFunction._raw(reg, poly.compose(*gens), reg.ctx.constant(1))
    # term-wise with cached powers when a value carries a denominator
    powers: dict[tuple[int, int], RationalFunction] = {}
    total = reg.zero
    for exps, c in poly.terms():
        term = reg.const(int(c))
        rest = [0] * len(exps)
        for i, e in enumerate(exps):
            e = int(e)
            if not e:
                continue
            if i in values:
                key = (i, e)
                if key not in powers:
                    powers[key] = values[i] ** e
                term = term * powers[key]
            else:
                rest[i] = e
        if any(rest):
            term = term * RationalFunction._raw(reg, reg.ctx.term(exp_vec=tuple(rest), coeff=1), reg.ctx.constant(1))
        total = total + term
    return total


def gcd(a: RationalFunction, b: RationalFunction) -> RationalFunction:
    """Primitive integer gcd of two polynomials, positive leading coefficient.

    Rational scalars are units, so ``gcd(2*x1, 0)`` is ``x1``.
    """
    b = a._check(b)
    if not (a.is_polynomial() and b.is_polynomial()):
        raise ValueError("gcd is defined on polynomials")
    g = a.num.gcd(b.num)
    if g.is_zero():
        return a.registry.zero
    g = g / g.content()
    if g.leading_coefficient() < 0:
        g = -g
    return RationalFunction._raw(a.registry, g, a.registry.ctx.constant(1))


# -- printing -------------------------------------------------------------


def _monomial(exps, names) -> str:
    parts = []
    for name, e in zip(names, exps):
        if e == 1:
            parts.append(name)
        elif e:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def format_poly(poly, names) -> str:
    """Integer polynomial in graded-lex order, e.g. ``x1^2*x2 - 3*s``."""
    if poly.is_zero():
        return "0"
    out = []
    for k, (exps, c) in enumerate(poly.terms()):
        c = int(c)
        mono = _monomial(exps, names)
        mag = abs(c)
        body = mono if mag == 1 and mono else (f"{mag}*{mono}" if mono else str(mag))
        if k == 0:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append((" - " if c < 0 else " + ") + body)
    return "".join(out)


def _is_atomic(poly) -> bool:
    """True when the printed polynomial needs no parentheses as a factor."""
    if len(poly) != 1:
        return False
    (exps, c), = poly.terms()
    if not any(exps):
        return c >= 0
    return c == 1 and sum(1 for e in exps if e) == 1


def format_rational(r: RationalFunction) -> str:
    names = r.registry.names
    num = format_poly(r.num, names)
    if r.den.is_one():
        return num
    den = format_poly(r.den, names)
    if len(r.num) > 1:
        num = f"({num})"
    if not _is_atomic(r.den):
        den = f"({den})"
    return f"{num}/{den}"


def is_atomic_str(r: RationalFunction) -> bool:
    """Whether ``str(r)`` can be used as a left factor without parentheses."""
    if r.den.is_one():
        if len(r.num) != 1:
            return False
        (exps, c), = r.num.terms()
        return c > 0
    return len(r.num) == 1 and r.num.leading_coefficient() > 0
