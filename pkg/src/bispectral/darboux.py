"""Dressing operators from the factorization identities and bispectral Darboux transforms.

For a bispectral pair, f a spectral function of the primal system (written in
z) and g one of the dual system (written in x), with m = ord L_f and
n = ord L'_g, the three factorizations

    g^{m+1} L_f = K g,    L_f g^{m+1} = g R,    L_f^{n+1} g = Q L_f

hold with K, R, Q given by the binomial expansions of ``g^N a`` and
``a g^N`` in ad-powers, truncated because ad_g^{m+1}(L_f) = 0 and
ad_{L_f}^{n+1}(g) = 0.  Every builder re-checks its identity exactly.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from math import comb

from .field import RationalFunction
from .operators import DiffOperator, ad_pow, op_mul, right_divide, right_divide_graded
from .systems import (
    BispectralPair,
    QuantumSystem,
    SpectralGenerator,
    check_commutativity,
    localize,
    spectral_dimension,
    unconfined_denominators,
)
from .wavefunctions import WaveFunction, apply_operator, exchange_xz
from .words import GeneratorTable, TableEntry, WordPoly, ad_word, anti_map, word_eval

LF, G, F_DUAL, LG_DUAL = "L_f", "g", "f", "L'_g"


class FactorizationError(RuntimeError):
    """A defining identity of K, R or Q failed: table or realizations are inconsistent."""


class NotBispectral(ValueError):
    """ad-powers of L_f on g fail to vanish in the expected number of steps."""


class NonzeroRemainder(ArithmeticError):
    def __init__(self, remainder: DiffOperator):
        super().__init__(f"nonzero remainder {remainder}")
        self.remainder = remainder


@dataclass(frozen=True)
class Certificate:
    name: str
    passed: bool
    detail: str = ""


class CertificateFailure(RuntimeError):
    def __init__(self, result: "TransformResult"):
        failed = [c.name for c in result.certificates if not c.passed]
        super().__init__(f"failed certificates: {', '.join(failed)}")
        self.result = result


def verify_intertwining(K: DiffOperator, L: DiffOperator, Lt: DiffOperator) -> tuple[bool, DiffOperator]:
    """K o L = Lt o K; returns the verdict and the defect K o L - Lt o K."""
    defect = op_mul(K, L) - op_mul(Lt, K)
    return defect.is_zero(), defect


def deduce_transformed(K: DiffOperator, L: DiffOperator, pivot: str | None) -> DiffOperator:
    """The Lt with K o L = Lt o K, found by right division of K o L by K.

    With ``pivot=None`` the division is by graded leading monomial, which
    accepts any nonzero K.
    """
    if pivot is None:
        quotient, remainder = right_divide_graded(op_mul(K, L), K)
    else:
        quotient, remainder = right_divide(op_mul(K, L), K, pivot)
    if not remainder.is_zero():
        raise NonzeroRemainder(remainder)
    return quotient


def ad_vanishing_order(Lf: DiffOperator, g: DiffOperator, max_iter: int = 8) -> int | None:
    """Smallest n with ad_{Lf}^{n+1}(g) = 0, or None if no vanishing within max_iter steps."""
    if not g.is_function():
        raise ValueError("g must be a multiplication operator")
    current = g
    for k in range(1, max_iter + 1):
        current = ad_pow(Lf, current, 1)
        if current.is_zero():
            return k - 1
    return None


@dataclass(frozen=True)
class DressingData:
    f: RationalFunction
    g: RationalFunction
    m: int
    n: int
    vanishing_order: int
    table: GeneratorTable
    K_word: WordPoly
    R_word: WordPoly
    Q_word: WordPoly
    K: DiffOperator
    R: DiffOperator
    Q: DiffOperator

    @property
    def L_f(self) -> DiffOperator:
        return self.table.realize(LF, "x")

    @property
    def L_g_dual(self) -> DiffOperator:
        return self.table.realize(LG_DUAL, "z")

    def bK_word(self) -> WordPoly:
        return anti_map(self.K_word, self.table)

    def bK(self) -> DiffOperator:
        return word_eval(self.bK_word(), self.table, "z")


def dressing_table(pair: BispectralPair, f, g) -> GeneratorTable:
    """Two-letter table: L_f <-> f and g <-> L'_g."""
    reg = pair.registry
    f = RationalFunction.coerce(reg, f)
    g = RationalFunction.coerce(reg, g)
    if g.is_zero():
        raise ValueError("g must be nonzero")
    Lf = pair.primal.operator_of(f)
    if Lf.is_zero() or Lf.order() <= 0:
        raise ValueError("L_f must have positive order")
    Lg = pair.dual.operator_of(g)
    return GeneratorTable(
        [
            TableEntry(LF, Lf, F_DUAL, DiffOperator.scalar(reg, "z", f)),
            TableEntry(G, DiffOperator.scalar(reg, "x", g), LG_DUAL, Lg),
        ]
    )


def _K_word(m: int) -> WordPoly:
    g = WordPoly.letter(G)
    return sum((comb(m + 1, j) * ad_word(G, LF, j) * g ** (m - j) for j in range(m + 1)), WordPoly())


def _R_word(m: int) -> WordPoly:
    g = WordPoly.letter(G)
    return sum(
        ((-1) ** j * comb(m + 1, j) * g ** (m - j) * ad_word(G, LF, j) for j in range(m + 1)),
        WordPoly(),
    )


def _Q_word(n: int) -> WordPoly:
    lf = WordPoly.letter(LF)
    return sum((comb(n + 1, j) * ad_word(LF, G, j) * lf ** (n - j) for j in range(n + 1)), WordPoly())


def _build(table: GeneratorTable, which: str) -> tuple[WordPoly, DiffOperator]:
    Lf = table.realize(LF, "x")
    gop = table.realize(G, "x")
    m = Lf.order()
    if which == "K":
        word = _K_word(m)
        op = word_eval(word, table, "x")
        ok = op_mul(gop ** (m + 1), Lf) == op_mul(op, gop)
        identity = "g^(m+1) o L_f = K o g"
    elif which == "R":
        word = _R_word(m)
        op = word_eval(word, table, "x")
        ok = op_mul(Lf, gop ** (m + 1)) == op_mul(gop, op)
        identity = "L_f o g^(m+1) = g o R"
    else:
        n = table.realize(LG_DUAL, "z").order()
        if not ad_pow(Lf, gop, n + 1).is_zero():
            raise NotBispectral(f"ad_(L_f)^{n + 1}(g) != 0 although ord L'_g = {n}")
        word = _Q_word(n)
        op = word_eval(word, table, "x")
        ok = op_mul(Lf ** (n + 1), gop) == op_mul(op, Lf)
        identity = "L_f^(n+1) o g = Q o L_f"
    if not ok:
        raise FactorizationError(f"defining identity {identity} fails")
    return word, op


def build_K(pair: BispectralPair, f, g) -> tuple[WordPoly, DiffOperator]:
    return _build(dressing_table(pair, f, g), "K")


def build_R(pair: BispectralPair, f, g) -> tuple[WordPoly, DiffOperator]:
    return _build(dressing_table(pair, f, g), "R")


def build_Q(pair: BispectralPair, f, g) -> tuple[WordPoly, DiffOperator]:
    return _build(dressing_table(pair, f, g), "Q")


def build_dressing(pair: BispectralPair, f, g) -> DressingData:
    table = dressing_table(pair, f, g)
    Lf = table.realize(LF, "x")
    gop = table.realize(G, "x")
    n = table.realize(LG_DUAL, "z").order()
    vanishing = ad_vanishing_order(Lf, gop, max_iter=n + 1)
    if vanishing is None:
        raise NotBispectral(f"ad_(L_f)^{n + 1}(g) != 0 although ord L'_g = {n}")
    K_word, K = _build(table, "K")
    R_word, R = _build(table, "R")
    Q_word, Q = _build(table, "Q")
    reg = pair.registry
    return DressingData(
        f=RationalFunction.coerce(reg, f),
        g=RationalFunction.coerce(reg, g),
        m=Lf.order(),
        n=n,
        vanishing_order=vanishing,
        table=table,
        K_word=K_word,
        R_word=R_word,
        Q_word=Q_word,
        K=K,
        R=R,
        Q=Q,
    )


@dataclass(frozen=True)
class TransformResult:
    system: QuantumSystem
    dressing: DressingData
    dresser: DiffOperator
    certificates: tuple[Certificate, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates)


def _certify(
    system: QuantumSystem,
    dresser: DiffOperator,
    originals: dict[str, DiffOperator],
    rng: random.Random,
    reference_dimension: int,
) -> tuple[Certificate, ...]:
    failed = []
    for gen in system.generators:
        ok = op_mul(dresser, originals[gen.name]) == op_mul(gen.image, dresser)
        if not ok:
            failed.append(gen.name)
    certs = [Certificate("intertwining", not failed, "defect for " + ", ".join(failed) if failed else f"{len(originals)} generators")]
    ok, pair = check_commutativity(system)
    certs.append(Certificate("commutativity", ok, "" if ok else f"[{pair[0]}, {pair[1]}] != 0"))
    dim = spectral_dimension(system, rng)
    nvars = len(system.base_vars)
    certs.append(
        Certificate("dimension", dim == nvars == reference_dimension, f"dim = {dim}, base dim = {nvars}, before = {reference_dimension}")
    )
    stray = [d for gen in system.generators for d in unconfined_denominators(gen.image, system.localizers)]
    certs.append(
        Certificate(
            "denominators",
            not stray,
            "confined to " + ", ".join(map(str, system.localizers)) if not stray else "stray: " + ", ".join(map(str, stray[:3])),
        )
    )
    return tuple(certs)


def darboux_transform(
    pair: BispectralPair, f, g, dressing: DressingData | None = None, seed: int = 0, strict: bool = True, prefix: str = "F"
) -> TransformResult:
    """DT(S_g, K, A) with A generated by f^{n+1} and f^{n+1} e_i.

    Images are K o L_{e_i} o Q o g^{-(m+1)}.
    """
    pair.validate()
    dd = dressing or build_dressing(pair, f, g)
    reg = pair.registry
    S = pair.primal
    Sg = localize(S, dd.g)
    tail = op_mul(dd.Q, DiffOperator.scalar(reg, "x", dd.g ** (-(dd.m + 1))))
    Lf_pow = dd.L_f ** (dd.n + 1)
    fpow = dd.f ** (dd.n + 1)
    gens = [SpectralGenerator(prefix, fpow, op_mul(dd.K, tail))]
    originals = {prefix: Lf_pow}
    for e in S.generators:
        name = prefix + e.name
        gens.append(SpectralGenerator(name, fpow * e.spectral, op_mul(op_mul(dd.K, e.image), tail)))
        originals[name] = op_mul(e.image, Lf_pow)
    system = QuantumSystem(reg, "x", tuple(gens), Sg.localizers, name=f"DT({S.name})" if S.name else "")
    rng = random.Random(seed)
    certs = _certify(system, dd.K, originals, rng, spectral_dimension(S, random.Random(seed)))
    result = TransformResult(system, dd, dd.K, certs)
    if strict and not result.passed:
        raise CertificateFailure(result)
    return result


def dual_darboux_transform(
    pair: BispectralPair, f, g, dressing: DressingData | None = None, seed: int = 0, strict: bool = True, prefix: str = "G"
) -> TransformResult:
    """DT(S'_f, b(K), A') with A' generated by g^{m+1} and g^{m+1} e'_j.

    Images are b(K) o L'_{e'_j} o f^{-1} o L'_g.
    """
    pair.validate()
    dd = dressing or build_dressing(pair, f, g)
    reg = pair.registry
    S = pair.dual
    Sf = localize(S, dd.f)
    bK = dd.bK()
    Lg = dd.L_g_dual
    tail = op_mul(DiffOperator.scalar(reg, "z", dd.f.inverse()), Lg)
    Lg_pow = Lg ** (dd.m + 1)
    gpow = dd.g ** (dd.m + 1)
    gens = [SpectralGenerator(prefix, gpow, op_mul(bK, tail))]
    originals = {prefix: Lg_pow}
    for e in S.generators:
        name = prefix + e.name
        gens.append(SpectralGenerator(name, gpow * e.spectral, op_mul(op_mul(bK, e.image), tail)))
        originals[name] = op_mul(e.image, Lg_pow)
    system = QuantumSystem(reg, "z", tuple(gens), Sf.localizers, name=f"DT({S.name})" if S.name else "")
    certs = _certify(system, bK, originals, random.Random(seed), spectral_dimension(S, random.Random(seed)))
    result = TransformResult(system, dd, bK, certs)
    if strict and not result.passed:
        raise CertificateFailure(result)
    return result


def transformed_wavefunction(pair: BispectralPair, dd: DressingData) -> WaveFunction:
    return apply_operator(dd.K, pair.wavefunction)


def duality_certificates(pair: BispectralPair, primal: TransformResult, dual: TransformResult) -> tuple[Certificate, ...]:
    """Checks that the two transforms are again bispectrally dual through K psi."""
    dd = primal.dressing
    psi = pair.wavefunction
    K_psi = apply_operator(dd.K, psi)
    bK_psi = apply_operator(dual.dresser, psi)
    certs = [Certificate("K psi = b(K) psi", K_psi == bK_psi)]
    bad = [
        gen.name
        for gen in primal.system.generators
        if apply_operator(gen.image, K_psi) != K_psi.scale(gen.spectral)
    ]
    bad += [
        gen.name
        for gen in dual.system.generators
        if apply_operator(gen.image, bK_psi) != bK_psi.scale(gen.spectral)
    ]
    certs.append(Certificate("eigenfunctions", not bad, ", ".join(bad)))
    return tuple(certs)


def check_exchange(pair: BispectralPair, dd: DressingData) -> tuple[bool, WaveFunction, WaveFunction]:
    """exchange_xz(K psi) against b(K) psi taken in the dual system's own frame.

    The dual frame renames z -> x, so b(K) becomes an x operator acting on the
    (exchange-symmetric) seed psi.
    """
    psi = pair.wavefunction
    if exchange_xz(psi) != psi:
        raise ValueError("exchange check needs an exchange-symmetric wavefunction")
    lhs = exchange_xz(apply_operator(dd.K, psi))
    rhs = apply_operator(dd.bK().exchange_xz(), psi)
    return lhs == rhs, lhs, rhs


def repair(pair: BispectralPair, primal: TransformResult, dual: TransformResult, name: str = "") -> BispectralPair:
    """The transformed systems as a new pair with wavefunction K psi."""
    psi = apply_operator(primal.dresser, pair.wavefunction)
    new = BispectralPair(primal.system, dual.system, psi, name=name)
    new.validate()
    return new


def vanishing_report(pair: BispectralPair, max_extra: int = 2) -> list[tuple[str, str, int, int | None]]:
    """Lemma check on every (primal generator, dual generator) combination.

    Rows are (primal name, dual name, ord L'_w, vanishing order or None).
    """
    reg = pair.registry
    rows = []
    for e, w in itertools.product(pair.primal.generators, pair.dual.generators):
        n = w.image.order()
        g = DiffOperator.scalar(reg, "x", w.spectral)
        rows.append((e.name, w.name, n, ad_vanishing_order(e.image, g, max_iter=n + max_extra)))
    return rows
