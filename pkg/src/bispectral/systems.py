"""Quantum Hamiltonian systems and bispectral pairs.

A system on the x block is given by spectral generators: a polynomial in the
dual coordinates z (the eigenvalue, i.e. an element of the spectral ring
embedded in functions of z) together with its commuting operator image in x.
A dual system is the mirror picture: spectral polynomials in x, images in z.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .field import RationalFunction, VariableRegistry, gcd
from .operators import DiffOperator, commutator, op_mul
from .wavefunctions import WaveFunction, validate_table
from .words import GeneratorTable, TableEntry, WordPoly, monomials_to_word


class NotExpressible(ValueError):
    """A spectral function is not a polynomial in the system's generators."""


class PairValidationError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralGenerator:
    name: str
    spectral: RationalFunction
    image: DiffOperator


@dataclass(frozen=True)
class QuantumSystem:
    registry: VariableRegistry
    block: str
    generators: tuple[SpectralGenerator, ...]
    localizers: tuple[RationalFunction, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "localizers", tuple(self.localizers))
        names = [g.name for g in self.generators]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate generator names in system {self.name!r}")
        allowed = set(self.spectral_vars) | set(self.registry.params)
        for g in self.generators:
            if g.image.block != self.block:
                raise ValueError(f"generator {g.name!r}: image acts on block {g.image.block!r}")
            if not g.spectral.is_polynomial() or not g.spectral.variables() <= allowed:
                raise ValueError(f"generator {g.name!r}: spectral value must be a polynomial in {self.spectral_vars}")
        for p in self.localizers:
            if not p.is_polynomial() or p.depends_on_block(self.registry.opposite(self.block)):
                raise ValueError(f"localizer {p} must be a polynomial on the base variety")

    @property
    def base_vars(self) -> tuple[str, ...]:
        return self.registry.block_vars(self.block)

    @property
    def spectral_vars(self) -> tuple[str, ...]:
        return self.registry.block_vars(self.registry.opposite(self.block))

    def generator(self, name: str) -> SpectralGenerator:
        for g in self.generators:
            if g.name == name:
                return g
        raise KeyError(f"system {self.name!r} has no generator {name!r}")

    def express(self, poly: RationalFunction) -> dict[tuple[int, ...], RationalFunction]:
        """Write ``poly`` as a polynomial in the generators' spectral values.

        Returns exponent vectors over ``self.generators`` with coefficients that
        are functions of the parameters only.
        """
        poly = RationalFunction.coerce(self.registry, poly)
        if not poly.is_polynomial() or not poly.variables() <= set(self.spectral_vars) | set(self.registry.params):
            raise NotExpressible(f"{poly} is not a polynomial in {self.spectral_vars}")
        direct = self._express_coordinates(poly)
        if direct is not None:
            return direct
        return self._express_linear(poly)

    def _express_coordinates(self, poly):
        reg = self.registry
        positions = {}
        for k, g in enumerate(self.generators):
            terms = g.spectral.poly_terms() if g.spectral.is_polynomial() else {}
            if len(terms) == 1:
                (exps, c), = terms.items()
                if c == 1 and sum(exps) == 1:
                    positions.setdefault(exps.index(1), k)
        idx = [reg.index(v) for v in self.spectral_vars]
        if not all(i in positions for i in idx if any(e[i] for e in poly.poly_terms())):
            return None
        out: dict[tuple[int, ...], RationalFunction] = {}
        for key, coeff in _split(poly, idx).items():
            exps = [0] * len(self.generators)
            for i, e in zip(idx, key):
                if e:
                    exps[positions[i]] = e
            out[tuple(exps)] = coeff
        return out

    def _express_linear(self, poly):
        reg = self.registry
        idx = [reg.index(v) for v in self.spectral_vars]
        target_deg = max((sum(k) for k in _split(poly, idx)), default=0)
        degs = [max((sum(k) for k in _split(g.spectral, idx)), default=0) for g in self.generators]
        usable = [k for k, d in enumerate(degs) if d > 0]
        candidates = []
        for exps in itertools.product(*[range(target_deg // degs[k] + 1) for k in usable]):
            if sum(e * degs[k] for e, k in zip(exps, usable)) <= target_deg:
                full = [0] * len(self.generators)
                for e, k in zip(exps, usable):
                    full[k] = e
                candidates.append(tuple(full))
        columns = []
        for exps in candidates:
            value = reg.one
            for e, g in zip(exps, self.generators):
                if e:
                    value = value * g.spectral**e
            columns.append(_split(value, idx))
        rows = sorted(set().union(_split(poly, idx), *columns))
        target = _split(poly, idx)
        matrix = [[col.get(r, reg.zero) for col in columns] for r in rows]
        rhs = [target.get(r, reg.zero) for r in rows]
        solution = _solve(matrix, rhs, reg)
        if solution is None:
            raise NotExpressible(f"{poly} is not a polynomial in the generators of {self.name or 'the system'}")
        return {exps: c for exps, c in zip(candidates, solution) if not c.is_zero()}

    def operator_of(self, poly) -> DiffOperator:
        """L_poly: the spectral polynomial evaluated on the commuting images."""
        coeffs = self.express(poly)
        powers: dict[tuple[int, int], DiffOperator] = {}
        total = DiffOperator.zero(self.registry, self.block)
        for exps, c in sorted(coeffs.items()):
            term = DiffOperator.identity(self.registry, self.block)
            for k, e in enumerate(exps):
                if e:
                    if (k, e) not in powers:
                        powers[k, e] = self.generators[k].image ** e
                    term = op_mul(term, powers[k, e])
            total = total + term.scale(c)
        return total

    def word_of(self, poly, letters: Sequence[str]) -> WordPoly:
        return monomials_to_word(self.express(poly), letters)


def _split(poly: RationalFunction, idx: list[int]) -> dict[tuple[int, ...], RationalFunction]:
    """Group a polynomial by monomials in the given variables; coefficients keep the rest."""
    reg = poly.registry
    ctx = reg.ctx
    den = RationalFunction._raw(reg, ctx.constant(1), poly.den)
    out: dict[tuple[int, ...], RationalFunction] = {}
    for exps, c in poly.num.terms():
        key = tuple(int(exps[i]) for i in idx)
        rest = tuple(0 if i in idx else int(e) for i, e in enumerate(exps))
        term = RationalFunction._raw(reg, ctx.term(exp_vec=rest, coeff=int(c)), ctx.constant(1))
        out[key] = out[key] + term if key in out else term
    return {k: v * den for k, v in out.items() if not v.is_zero()}


def _solve(matrix, rhs, reg) -> list[RationalFunction] | None:
    """Any solution of a linear system over Q(params), or None if inconsistent."""
    rows = [list(r) + [b] for r, b in zip(matrix, rhs)]
    ncols = len(matrix[0]) if matrix else 0
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(rows)) if not rows[i][c].is_zero()), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        inv = rows[r][c].inverse()
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and not rows[i][c].is_zero():
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    if any(not row[-1].is_zero() for row in rows[r:]):
        return None
    solution = [reg.zero] * ncols
    for i, c in enumerate(pivots):
        solution[c] = rows[i][-1]
    return solution


def localize(s: QuantumSystem, g) -> QuantumSystem:
    """Admit denominators dividing powers of ``g``."""
    g = RationalFunction.coerce(s.registry, g)
    if g.is_zero():
        raise ValueError("cannot localize by zero")
    if g.is_constant():
        return s
    if not g.is_polynomial():
        raise ValueError("localize by a polynomial")
    g = gcd(g, g)
    if g in s.localizers:
        return s
    return QuantumSystem(s.registry, s.block, s.generators, s.localizers + (g,), s.name)


def check_commutativity(s: QuantumSystem) -> tuple[bool, tuple[str, str] | None]:
    """All images pairwise commute; otherwise the first failing pair of names."""
    for a, b in itertools.combinations(s.generators, 2):
        if not commutator(a.image, b.image).is_zero():
            return False, (a.name, b.name)
    return True, None


def _rank(rows: list[list[Fraction]]) -> int:
    rows = [list(r) for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for c in range(ncols):
        p = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[rank], rows[p] = rows[p], rows[rank]
        for i in range(rank + 1, len(rows)):
            if rows[i][c] != 0:
                f = rows[i][c] / rows[rank][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def jacobian_rank(polys: Sequence[RationalFunction], variables: Sequence[str], rng: random.Random, attempts: int = 3) -> int:
    """Generic rank of the Jacobian, sampled at random integer points in [2, 97]."""
    if not polys:
        return 0
    reg = polys[0].registry
    jac = [[p.derive(v) for v in variables] for p in polys]
    sample_vars = list(variables) + list(reg.params)
    best = 0
    tries = 0
    while tries < attempts:
        point = {v: rng.randint(2, 97) for v in sample_vars}
        try:
            rows = [[e.substitute(point).to_fraction() for e in row] for row in jac]
        except ZeroDivisionError:
            continue
        tries += 1
        best = max(best, _rank(rows))
    return best


def spectral_dimension(s: QuantumSystem, rng: random.Random | None = None) -> int:
    rng = rng or random.Random(0)
    return jacobian_rank([g.spectral for g in s.generators], s.spectral_vars, rng)


def denominator_confined(den: RationalFunction, localizers: Sequence[RationalFunction]) -> bool:
    """Whether ``den`` divides a product of powers of the localizers."""
    reg = den.registry
    d = den.num
    prod = reg.ctx.constant(1)
    for p in localizers:
        prod = prod * p.num
    while not d.is_constant():
        h = d.gcd(prod)
        if h.is_constant():
            return False
        d = d / h
    return True


def unconfined_denominators(op: DiffOperator, localizers: Sequence[RationalFunction]) -> list[RationalFunction]:
    return [d for d in op.denominators() if not denominator_confined(d, localizers)]


def primal_letter(name: str) -> str:
    return f"L_{name}"


def dual_letter(name: str) -> str:
    return f"L'_{name}"


def pair_table(primal: QuantumSystem, dual: QuantumSystem) -> GeneratorTable:
    """b(L_e) = e (multiplication in z) and b(w) = L'_w for dual generators w."""
    reg = primal.registry
    entries = [
        TableEntry(primal_letter(g.name), g.image, g.name, DiffOperator.scalar(reg, "z", g.spectral))
        for g in primal.generators
    ]
    entries += [
        TableEntry(g.name, DiffOperator.scalar(reg, "x", g.spectral), dual_letter(g.name), g.image)
        for g in dual.generators
    ]
    return GeneratorTable(entries)


@dataclass
class BispectralPair:
    primal: QuantumSystem
    dual: QuantumSystem
    wavefunction: WaveFunction
    name: str = ""
    table: GeneratorTable = field(default=None)

    def __post_init__(self):
        if self.primal.block != "x" or self.dual.block != "z":
            raise ValueError("a pair needs a primal system on x and a dual system on z")
        if self.primal.registry != self.dual.registry:
            raise ValueError("primal and dual systems use different registries")
        if self.table is None:
            self.table = pair_table(self.primal, self.dual)

    @property
    def registry(self) -> VariableRegistry:
        return self.primal.registry

    def validate(self) -> None:
        """Every generator acts on the wavefunction as its dual image does."""
        bad = validate_table(self.table, self.wavefunction)
        if bad:
            raise PairValidationError(f"pair {self.name!r}: wavefunction check fails for {', '.join(bad)}")
