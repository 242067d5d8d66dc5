"""Partial differential operators with rational-function coefficients.

An operator is a finite sum ``c_alpha * D^alpha`` over multi-indices in the
derivative letters of one block (``x`` or ``z``); coefficients always sit to
the left of the derivatives.
"""

from __future__ import annotations

import contextvars
import math
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from .field import RationalFunction, RegistryMismatch, VariableRegistry, is_atomic_str

# order of the zero operator; below every integer and absorbing under +
ZERO_ORDER = float("-inf")

MultiIndex = tuple[int, ...]


class BlockMismatch(ValueError):
    """Operators act on different variable blocks."""


class UnsupportedDivisor(ValueError):
    """Divisor's pivot-leading part is not a pure function."""


class ResourceLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Limits:
    max_order: int | None = None
    max_terms: int | None = None


_limits: contextvars.ContextVar[Limits] = contextvars.ContextVar("limits", default=Limits())


@contextmanager
def resource_limits(max_order: int | None = None, max_terms: int | None = None) -> Iterator[Limits]:
    """Cap operator order and coefficient size for products made inside the block."""
    token = _limits.set(Limits(max_order, max_terms))
    try:
        yield _limits.get()
    finally:
        _limits.reset(token)


class DiffOperator:
    __slots__ = ("registry", "block", "terms", "_hash")

    def __init__(self, registry: VariableRegistry, block: str, terms: Mapping[MultiIndex, RationalFunction] | None = None):
        n = len(registry.block_vars(block))
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(alpha)
            if len(alpha) != n or min(alpha, default=0) < 0:
                raise ValueError(f"bad multi-index {alpha} for block {block!r}")
            c = RationalFunction.coerce(registry, c)
            if not c.is_zero():
                clean[alpha] = c
        self.registry = registry
        self.block = block
        self.terms: dict[MultiIndex, RationalFunction] = clean
        self._hash = None

    @classmethod
    def _raw(cls, registry, block, terms) -> "DiffOperator":
        self = object.__new__(cls)
        self.registry = registry
        self.block = block
        self.terms = terms
        self._hash = None
        return self

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, registry: VariableRegistry, block: str) -> "DiffOperator":
        return cls._raw(registry, block, {})

    @classmethod
    def scalar(cls, registry: VariableRegistry, block: str, value) -> "DiffOperator":
        c = RationalFunction.coerce(registry, value)
        n = len(registry.block_vars(block))
        return cls._raw(registry, block, {} if c.is_zero() else {(0,) * n: c})

    @classmethod
    def identity(cls, registry: VariableRegistry, block: str) -> "DiffOperator":
        return cls.scalar(registry, block, 1)

    @classmethod
    def partial(cls, registry: VariableRegistry, var: str, power: int = 1) -> "DiffOperator":
        block = registry.block_of(var)
        if block is None:
            raise ValueError(f"cannot differentiate by parameter {var!r}")
        names = registry.block_vars(block)
        alpha = tuple(power if v == var else 0 for v in names)
        return cls._raw(registry, block, {alpha: registry.one})

    # -- structure ---------------------------------------------------------

    @property
    def nvars(self) -> int:
        return len(self.registry.block_vars(self.block))

    def order(self):
        if not self.terms:
            return ZERO_ORDER
        return max(sum(a) for a in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_function(self) -> bool:
        """Order 0 or zero, i.e. a multiplication operator."""
        return all(not any(a) for a in self.terms)

    def as_function(self) -> RationalFunction:
        if not self.is_function():
            raise ValueError("operator has positive order")
        return self.terms.get((0,) * self.nvars, self.registry.zero)

    def coefficient(self, alpha: MultiIndex) -> RationalFunction:
        return self.terms.get(tuple(alpha), self.registry.zero)

    def size(self) -> int:
        return sum(len(c.num) + len(c.den) for c in self.terms.values())

    def denominators(self) -> list[RationalFunction]:
        reg = self.registry
        out = []
        for c in self.terms.values():
            if not c.den.is_constant():
                out.append(RationalFunction._raw(reg, c.den, reg.ctx.constant(1)))
        return out

    def _same(self, other: "DiffOperator") -> None:
        if other.registry is not self.registry and other.registry != self.registry:
            raise RegistryMismatch("registry mismatch")
        if other.block != self.block:
            raise BlockMismatch(f"operators act on blocks {self.block!r} and {other.block!r}")

    def _lift(self, other) -> "DiffOperator":
        if isinstance(other, DiffOperator):
            self._same(other)
            return other
        return DiffOperator.scalar(self.registry, self.block, other)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)
        terms = dict(self.terms)
        for a, c in other.terms.items():
            s = terms[a] + c if a in terms else c
            if s.is_zero():
                terms.pop(a, None)
            else:
                terms[a] = s
        return DiffOperator._raw(self.registry, self.block, terms)

    __radd__ = __add__

    def __neg__(self):
        return DiffOperator._raw(self.registry, self.block, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def scale(self, value) -> "DiffOperator":
        """Left multiplication by a function (no Leibniz terms)."""
        c = RationalFunction.coerce(self.registry, value)
        if c.is_zero():
            return DiffOperator.zero(self.registry, self.block)
        return DiffOperator._raw(self.registry, self.block, {a: c * v for a, v in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, DiffOperator):
            return op_mul(self, other)
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.scale(other)
        if isinstance(other, RationalFunction):
            return op_mul(self, DiffOperator.scalar(self.registry, self.block, other))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction, RationalFunction)) and not isinstance(other, bool):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("exponent must be an integer")
        if k < 0:
            if self.is_function() and not self.is_zero():
                return DiffOperator.scalar(self.registry, self.block, self.as_function() ** k)
            raise ValueError("negative powers only exist for nonzero functions")
        result = DiffOperator.identity(self.registry, self.block)
        base = self
        while k:
            if k & 1:
                result = op_mul(result, base)
            k >>= 1
            if k:
                base = op_mul(base, base)
        return result

    def __eq__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        return self.registry == other.registry and self.block == other.block and self.terms == other.terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.block, frozenset(self.terms.items())))
        return self._hash

    def degree_in(self, var: str) -> int:
        """Degree in one derivative letter (-1 for the zero operator)."""
        i = self.registry.block_vars(self.block).index(var)
        return max((a[i] for a in self.terms), default=-1)

    def exchange_xz(self) -> "DiffOperator":
        """Rename x_i <-> z_i everywhere, moving the operator to the other block."""
        reg = self.registry
        other = reg.opposite(self.block)
        if len(reg.block_vars(other)) != self.nvars:
            raise ValueError("x <-> z exchange needs blocks of equal size")
        return DiffOperator._raw(reg, other, {a: c.swap_xz() for a, c in self.terms.items()})

    def __str__(self):
        return format_operator(self)

    def __repr__(self):
        return f"DiffOperator({self.block}: {self})"


def _add_into(acc: dict, key, value: RationalFunction) -> None:
    if key in acc:
        acc[key] = acc[key] + value
    else:
        acc[key] = value


def _shift(alpha: MultiIndex, i: int, k: int = 1) -> MultiIndex:
    return alpha[:i] + (alpha[i] + k,) + alpha[i + 1 :]


def _check_limits(order, result: DiffOperator | None = None) -> None:
    lim = _limits.get()
    if lim.max_order is not None and order > lim.max_order:
        raise ResourceLimitExceeded(f"operator order {order} exceeds limit {lim.max_order}")
    if result is not None and lim.max_terms is not None:
        size = result.size()
        if size > lim.max_terms:
            raise ResourceLimitExceeded(f"operator size {size} exceeds limit {lim.max_terms}")


class _Atoms:
    """Irreducible denominator factors met during one composition.

    A denominator is held as an integer times a product of atom powers, so
    sums can be brought to a common denominator without polynomial gcds.
    """

    def __init__(self, ctx):
        self.ctx = ctx
        self.polys: list = []
        self._seen: list[tuple[object, tuple[int, tuple[tuple[int, int], ...]]]] = []

    def index(self, p) -> int:
        for i, q in enumerate(self.polys):
            if q == p:
                return i
        self.polys.append(p)
        return len(self.polys) - 1

    def split(self, den) -> tuple[int, tuple[tuple[int, int], ...]]:
        """den -> (integer content, ((atom, exponent), ...))."""
        if den.is_constant():
            return int(den.leading_coefficient()), ()
        for known, result in self._seen:
            if known == den:
                return result
        content, factors = den.factor()
        result = (int(content), tuple(sorted((self.index(f), int(e)) for f, e in factors)))
        self._seen.append((den, result))
        return result


class _Sum:
    """Accumulates num / (k * prod atoms^e) terms for one output coefficient."""

    __slots__ = ("terms",)

    def __init__(self):
        self.terms: list[tuple[object, int, dict[int, int]]] = []

    def add(self, num, k: int, exps: dict[int, int]) -> None:
        self.terms.append((num, k, exps))

    def total(self, registry, atoms: _Atoms) -> RationalFunction:
        ctx = atoms.ctx
        top: dict[int, int] = {}
        lcm_int = 1
        for _, k, exps in self.terms:
            lcm_int = lcm_int * abs(k) // math.gcd(lcm_int, abs(k))
            for i, e in exps.items():
                if e > top.get(i, 0):
                    top[i] = e
        num = ctx.constant(0)
        for n, k, exps in self.terms:
            scale = ctx.constant(lcm_int // k)
            for i, e in top.items():
                d = e - exps.get(i, 0)
                if d:
                    scale = scale * atoms.polys[i] ** d
            num = num + n * scale
        if num.is_zero():
            return registry.zero
        for i in list(top):
            p = atoms.polys[i]
            while top[i]:
                try:
                    num = num / p
                except Exception:
                    break
                top[i] -= 1
        c = math.gcd(int(num.content()), lcm_int)
        if c != 1:
            num = num / c
            lcm_int //= c
        den = ctx.constant(lcm_int)
        for i, e in top.items():
            if e:
                den = den * atoms.polys[i] ** e
        if den.leading_coefficient() < 0:
            num, den = -num, -den
        return RationalFunction._raw(registry, num, den)


def op_mul(a: DiffOperator, b: DiffOperator) -> DiffOperator:
    """Composition a o b.

    Each derivative letter of ``a`` is moved past ``b`` one at a time with
    ``D_i o c = c D_i + dc/dx_i``; the partial results ``D^alpha o b`` are
    shared between multi-indices.

    The rewriting runs on integer polynomials.  With ``den`` the common
    denominator of b and ``rad`` the product of its irreducible factors,
    every coefficient of ``D^alpha o b`` has the form ``P / (den rad^|alpha|)``
    and one derivative step is ``D_i(P / (den rad^k)) =
    (D_i P rad - P (u_i + k D_i rad)) / (den rad^(k+1))`` with the polynomial
    ``u_i = rad D_i den / den``.  Denominators stay factored until each output
    coefficient is reduced once.
    """
    a._same(b)
    if not a.terms or not b.terms:
        return DiffOperator.zero(a.registry, a.block)
    _check_limits(a.order() + b.order())
    reg = a.registry
    ctx = reg.ctx
    names = reg.block_vars(a.block)
    var_idx = [reg.index(v) for v in names]
    n = len(names)
    atoms = _Atoms(ctx)

    # common denominator of b in factored form
    b_int = 1
    b_exps: dict[int, int] = {}
    for c in b.terms.values():
        k, fs = atoms.split(c.den)
        b_int = b_int * abs(k) // math.gcd(b_int, abs(k))
        for i, e in fs:
            b_exps[i] = max(b_exps.get(i, 0), e)
    den = ctx.constant(b_int)
    rad = ctx.constant(1)
    for i, e in b_exps.items():
        den = den * atoms.polys[i] ** e
        rad = rad * atoms.polys[i]
    trivial = rad.is_one()
    u = [(den.derivative(i) * rad) / den for i in var_idx]
    drad = [rad.derivative(i) for i in var_idx]
    base = {beta: c.num * (den / c.den) for beta, c in b.terms.items()}
    shifted: dict[MultiIndex, dict[MultiIndex, object]] = {(0,) * n: base}

    def d_pow(alpha: MultiIndex):
        if alpha in shifted:
            return shifted[alpha]
        i = next(k for k, e in enumerate(alpha) if e)
        prev_alpha = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1 :]
        prev = d_pow(prev_alpha)
        k = sum(prev_alpha)
        vi = var_idx[i]
        out: dict = {}
        for beta, P in prev.items():
            up = _shift(beta, i)
            t = P if trivial else P * rad
            out[up] = out[up] + t if up in out else t
            if trivial:
                dP = P.derivative(vi)
            else:
                corr = u[i] + drad[i] * k if k else u[i]
                dP = P.derivative(vi) * rad - P * corr
            if not dP.is_zero():
                out[beta] = out[beta] + dP if beta in out else dP
        out = {key: v for key, v in out.items() if not v.is_zero()}
        shifted[alpha] = out
        return out

    acc: dict[MultiIndex, _Sum] = {}
    for alpha in sorted(a.terms, key=lambda t: (sum(t), t)):
        c = a.terms[alpha]
        k_a, fs_a = atoms.split(c.den)
        level = sum(alpha)
        exps = dict(fs_a)
        for i, e in b_exps.items():
            exps[i] = exps.get(i, 0) + e + level
        k = k_a * b_int
        for beta, P in d_pow(alpha).items():
            acc.setdefault(beta, _Sum()).add(c.num * P, k, exps)
    result = {}
    for beta, total in acc.items():
        v = total.total(reg, atoms)
        if not v.is_zero():
            result[beta] = v
    out = DiffOperator._raw(reg, a.block, result)
    _check_limits(out.order(), out)
    return out


def _op_mul_reference(a: DiffOperator, b: DiffOperator) -> DiffOperator:
    """Plain coefficient-wise rewriting; kept as an independent check of op_mul."""
    a._same(b)
    reg = a.registry
    names = reg.block_vars(a.block)
    var_idx = [reg.index(v) for v in names]
    result = DiffOperator.zero(reg, a.block)
    for alpha, c in a.terms.items():
        current = dict(b.terms)
        for i, e in enumerate(alpha):
            for _ in range(e):
                nxt: dict[MultiIndex, RationalFunction] = {}
                for beta, d in current.items():
                    _add_into(nxt, _shift(beta, i), d)
                    dd = d.derive(var_idx[i])
                    if not dd.is_zero():
                        _add_into(nxt, beta, dd)
                current = nxt
        result = result + DiffOperator(reg, a.block, current).scale(c)
    return result


def commutator(a: DiffOperator, b: DiffOperator) -> DiffOperator:
    """[a, b] = a o b - b o a."""
    return op_mul(a, b) - op_mul(b, a)


def ad_pow(a: DiffOperator, b: DiffOperator, j: int) -> DiffOperator:
    """j-fold nested commutator ad_a^j(b); ad_a^0(b) = b."""
    if j < 0:
        raise ValueError("ad power must be non-negative")
    a._same(b)
    out = b
    for _ in range(j):
        if out.is_zero():
            break
        out = commutator(a, out)
    return out


def apply(a: DiffOperator, phi: RationalFunction) -> RationalFunction:
    """Action of the operator on a function."""
    reg = a.registry
    phi = RationalFunction.coerce(reg, phi)
    var_idx = [reg.index(v) for v in reg.block_vars(a.block)]
    derivs: dict[MultiIndex, RationalFunction] = {(0,) * len(var_idx): phi}

    def d(alpha):
        if alpha not in derivs:
            i = next(k for k, e in enumerate(alpha) if e)
            derivs[alpha] = d(alpha[:i] + (alpha[i] - 1,) + alpha[i + 1 :]).derive(var_idx[i])
        return derivs[alpha]

    total = reg.zero
    for alpha, c in a.terms.items():
        total = total + c * d(alpha)
    return total


def conjugate_by_function(g, a: DiffOperator) -> DiffOperator:
    """g o a o g^{-1}."""
    g = RationalFunction.coerce(a.registry, g)
    if g.is_zero():
        raise ZeroDivisionError("conjugation by the zero function")
    return op_mul(a, DiffOperator.scalar(a.registry, a.block, g.inverse())).scale(g)


def order(a: DiffOperator):
    return a.order()


def right_divide(a: DiffOperator, k: DiffOperator, pivot: str) -> tuple[DiffOperator, DiffOperator]:
    """Ore right division with respect to one derivative letter.

    Returns ``(q, r)`` with ``a = q o k + r`` and ``deg_pivot(r) < deg_pivot(k)``.
    The part of ``k`` of top pivot degree must be a single term
    ``c(x) D_pivot^d``.
    """
    a._same(k)
    if k.is_zero():
        raise ZeroDivisionError("division by the zero operator")
    names = a.registry.block_vars(a.block)
    if pivot not in names:
        raise ValueError(f"pivot {pivot!r} is not a variable of block {a.block!r}")
    p = names.index(pivot)
    dk = k.degree_in(pivot)
    top = [alpha for alpha in k.terms if alpha[p] == dk]
    if len(top) != 1 or any(e for i, e in enumerate(top[0]) if i != p):
        raise UnsupportedDivisor(f"leading part of divisor in D[{pivot}] is not a pure function")
    inv_lc = k.terms[top[0]].inverse()
    reg = a.registry
    quotient = DiffOperator.zero(reg, a.block)
    rem = a
    while not rem.is_zero():
        d = rem.degree_in(pivot)
        if d < dk:
            break
        step = {
            alpha[:p] + (alpha[p] - dk,) + alpha[p + 1 :]: c * inv_lc
            for alpha, c in rem.terms.items()
            if alpha[p] == d
        }
        t = DiffOperator._raw(reg, a.block, step)
        quotient = quotient + t
        rem = rem - op_mul(t, k)
    return quotient, rem



def _glex(alpha: MultiIndex):
    return (sum(alpha), alpha)


def right_divide_graded(a: DiffOperator, k: DiffOperator) -> tuple[DiffOperator, DiffOperator]:
    """Right division by leading derivative monomial in graded-lex order.

    Returns ``(q, r)`` with ``a = q o k + r`` where no term of ``r`` has a
    multi-index divisible by the leading one of ``k``.  Leading symbols
    multiply, so ``r = 0`` exactly when ``a`` lies in the left ideal
    generated by ``k``; no condition on the shape of ``k`` is needed.
    """
    a._same(k)
    if k.is_zero():
        raise ZeroDivisionError("division by the zero operator")
    reg = a.registry
    lead = max(k.terms, key=_glex)
    inv_lc = k.terms[lead].inverse()
    quotient: dict[MultiIndex, RationalFunction] = {}
    rest: dict[MultiIndex, RationalFunction] = {}
    rem = a
    while not rem.is_zero():
        alpha = max(rem.terms, key=_glex)
        c = rem.terms[alpha]
        if all(x >= y for x, y in zip(alpha, lead)):
            beta = tuple(x - y for x, y in zip(alpha, lead))
            t = DiffOperator._raw(reg, a.block, {beta: c * inv_lc})
            _add_into(quotient, beta, c * inv_lc)
            rem = rem - op_mul(t, k)
        else:
            rest[alpha] = c
            rem = DiffOperator._raw(reg, a.block, {b: v for b, v in rem.terms.items() if b != alpha})
    return DiffOperator(reg, a.block, quotient), DiffOperator._raw(reg, a.block, rest)

# -- printing -------------------------------------------------------------


def _d_monomial(alpha: MultiIndex, names) -> str:
    parts = []
    for v, e in zip(names, alpha):
        if e == 1:
            parts.append(f"D[{v}]")
        elif e:
            parts.append(f"D[{v}]^{e}")
    return "*".join(parts)


def format_operator(op: DiffOperator) -> str:
    """Coefficients left of derivative monomials, graded-lex descending."""
    if not op.terms:
        return "0"
    names = op.registry.block_vars(op.block)
    out = []
    for k, alpha in enumerate(sorted(op.terms, key=lambda t: (sum(t), t), reverse=True)):
        c = op.terms[alpha]
        neg = c.num.leading_coefficient() < 0
        cabs = -c if neg else c
        mono = _d_monomial(alpha, names)
        if not mono:
            body = str(cabs)
            if neg and k > 0 and cabs.den.is_one() and len(cabs.num) > 1:
                body = f"({body})"
        elif cabs.is_one():
            body = mono
        elif is_atomic_str(cabs):
            body = f"{cabs}*{mono}"
        else:
            body = f"({cabs})*{mono}"
        if k == 0:
            out.append(("-" if neg else "") + (f"({body})" if neg and not mono and len(cabs.num) > 1 and cabs.den.is_one() else body))
        else:
            out.append((" - " if neg else " + ") + body)
    return "".join(out)
