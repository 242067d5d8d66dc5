"""Symbolic eigenfunctions over finite, derivative-closed kernel bases.

Special functions are never evaluated: a kernel basis is a list of formal
symbols together with rules expressing each partial derivative of each symbol
as a rational-linear combination of symbols.  The Airy kernel, for instance,
encodes ``Ai'' (w) = w Ai(w)`` through the pair ``A, Ap``.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .field import RationalFunction, VariableRegistry
from .operators import DiffOperator, MultiIndex
from .words import GeneratorTable, WordPoly, anti_map, word_eval

LinearForm = dict[str, RationalFunction]


class KernelError(ValueError):
    pass


class KernelBasis:
    def __init__(
        self,
        registry: VariableRegistry,
        symbols: Sequence[str],
        rules: Mapping[tuple[str, str], Mapping[str, object]],
        symmetric: bool = False,
    ):
        self.registry = registry
        self.symbols = tuple(symbols)
        self.symmetric = symmetric
        if not self.symbols or len(set(self.symbols)) != len(self.symbols):
            raise KernelError("kernel needs distinct symbols")
        variables = registry.x_vars + registry.z_vars
        table: dict[tuple[str, str], LinearForm] = {}
        for (var, sym), form in rules.items():
            if var not in variables:
                raise KernelError(f"rule for unknown coordinate {var!r}")
            if sym not in self.symbols:
                raise KernelError(f"rule for undeclared symbol {sym!r}")
            for target in form:
                if target not in self.symbols:
                    raise KernelError(f"basis not closed: D[{var}] {sym} mentions {target!r}")
            table[var, sym] = {t: RationalFunction.coerce(registry, c) for t, c in form.items()}
            table[var, sym] = {t: c for t, c in table[var, sym].items() if not c.is_zero()}
        for var in variables:
            for sym in self.symbols:
                if (var, sym) not in table:
                    raise KernelError(f"basis not closed: no rule for D[{var}] {sym}")
        self.rules = table
        self._check_mixed_partials(variables)
        if symmetric:
            self._check_symmetry()

    def derive_form(self, form: LinearForm, var: str) -> LinearForm:
        out: LinearForm = {}
        for sym, c in form.items():
            dc = c.derive(var)
            if not dc.is_zero():
                out[sym] = out[sym] + dc if sym in out else dc
            for target, r in self.rules[var, sym].items():
                t = c * r
                out[target] = out[target] + t if target in out else t
        return {s: c for s, c in out.items() if not c.is_zero()}

    def _check_mixed_partials(self, variables) -> None:
        for i, u in enumerate(variables):
            for v in variables[i + 1 :]:
                for sym in self.symbols:
                    one = {sym: self.registry.one}
                    uv = self.derive_form(self.derive_form(one, v), u)
                    vu = self.derive_form(self.derive_form(one, u), v)
                    if uv != vu:
                        raise KernelError(f"inconsistent mixed partials D[{u}] D[{v}] on {sym}")

    def _check_symmetry(self) -> None:
        reg = self.registry
        if len(reg.x_vars) != len(reg.z_vars):
            raise KernelError("symmetric kernel needs equal numbers of x and z variables")
        for xv, zv in zip(reg.x_vars, reg.z_vars):
            for sym in self.symbols:
                swapped = {t: c.swap_xz() for t, c in self.rules[xv, sym].items()}
                if swapped != self.rules[zv, sym]:
                    raise KernelError(f"kernel rules for {sym} are not invariant under x <-> z")

    def seed(self) -> "WaveFunction":
        """Coefficient 1 on the first symbol."""
        return WaveFunction(self, {self.symbols[0]: self.registry.one})


def kernel_define(registry, symbols, rules, symmetric=False) -> KernelBasis:
    return KernelBasis(registry, symbols, rules, symmetric)


def exponential_kernel(registry: VariableRegistry) -> KernelBasis:
    """exp(<x, z>): D[x_i] E = z_i E and D[z_i] E = x_i E."""
    if len(registry.x_vars) != len(registry.z_vars):
        raise KernelError("exponential kernel needs equal numbers of x and z variables")
    rules = {}
    for xv, zv in zip(registry.x_vars, registry.z_vars):
        rules[xv, "E"] = {"E": registry.var(zv)}
        rules[zv, "E"] = {"E": registry.var(xv)}
    return KernelBasis(registry, ["E"], rules, symmetric=True)


def airy_kernel(registry: VariableRegistry, airy_index: int = -1) -> KernelBasis:
    """exp(sum_{i != k} x_i z_i) * Ai(x_k + z_k) with symbols A and Ap (= Ai')."""
    n = len(registry.x_vars)
    if n != len(registry.z_vars):
        raise KernelError("Airy kernel needs equal numbers of x and z variables")
    k = airy_index % n
    rules = {}
    for i, (xv, zv) in enumerate(zip(registry.x_vars, registry.z_vars)):
        for var in (xv, zv):
            if i == k:
                w = registry.var(registry.x_vars[k]) + registry.var(registry.z_vars[k])
                rules[var, "A"] = {"Ap": registry.one}
                rules[var, "Ap"] = {"A": w}
            else:
                other = registry.var(zv if var == xv else xv)
                rules[var, "A"] = {"A": other}
                rules[var, "Ap"] = {"Ap": other}
    return KernelBasis(registry, ["A", "Ap"], rules, symmetric=True)


class WaveFunction:
    __slots__ = ("basis", "coefficients")

    def __init__(self, basis: KernelBasis, coefficients: Mapping[str, object]):
        self.basis = basis
        reg = basis.registry
        clean = {}
        for sym, c in coefficients.items():
            if sym not in basis.symbols:
                raise KernelError(f"unknown basis symbol {sym!r}")
            c = RationalFunction.coerce(reg, c)
            if not c.is_zero():
                clean[sym] = c
        self.coefficients: LinearForm = clean

    def derive(self, var: str) -> "WaveFunction":
        return WaveFunction(self.basis, self.basis.derive_form(self.coefficients, var))

    def scale(self, value) -> "WaveFunction":
        c = RationalFunction.coerce(self.basis.registry, value)
        return WaveFunction(self.basis, {s: c * v for s, v in self.coefficients.items()})

    def __add__(self, other: "WaveFunction") -> "WaveFunction":
        self._same(other)
        out = dict(self.coefficients)
        for s, c in other.coefficients.items():
            out[s] = out[s] + c if s in out else c
        return WaveFunction(self.basis, out)

    def __sub__(self, other: "WaveFunction") -> "WaveFunction":
        return self + other.scale(-1)

    def _same(self, other: "WaveFunction") -> None:
        if other.basis is not self.basis and other.basis.symbols != self.basis.symbols:
            raise KernelError("wavefunctions over different bases")

    def is_zero(self) -> bool:
        return not self.coefficients

    def __eq__(self, other):
        if not isinstance(other, WaveFunction):
            return NotImplemented
        return self.basis.symbols == other.basis.symbols and self.coefficients == other.coefficients

    def __str__(self):
        if not self.coefficients:
            return "0"
        return " + ".join(f"({c})*{s}" for s, c in self.coefficients.items())

    def __repr__(self):
        return f"WaveFunction({self})"


def apply_operator(op: DiffOperator, psi: WaveFunction) -> WaveFunction:
    """Act with an operator on the x (or z) arguments of a wavefunction."""
    names = op.registry.block_vars(op.block)
    derivs: dict[MultiIndex, WaveFunction] = {(0,) * len(names): psi}

    def d(alpha: MultiIndex) -> WaveFunction:
        if alpha not in derivs:
            i = next(k for k, e in enumerate(alpha) if e)
            derivs[alpha] = d(alpha[:i] + (alpha[i] - 1,) + alpha[i + 1 :]).derive(names[i])
        return derivs[alpha]

    out = WaveFunction(psi.basis, {})
    for alpha, c in op.terms.items():
        out = out + d(alpha).scale(c)
    return out


def check_eigen(op: DiffOperator, psi: WaveFunction, eigenvalue) -> bool:
    """Whether ``op psi = eigenvalue * psi`` exactly."""
    reg = op.registry
    eigenvalue = RationalFunction.coerce(reg, eigenvalue)
    if eigenvalue.depends_on_block(op.block):
        raise ValueError("eigenvalue must not depend on the variables the operator acts on")
    return apply_operator(op, psi) == psi.scale(eigenvalue)


def check_duality(w: WordPoly, table: GeneratorTable, psi: WaveFunction) -> bool:
    """Whether ``w`` acting in x and ``b(w)`` acting in z agree on psi."""
    lhs = apply_operator(word_eval(w, table, "x"), psi)
    rhs = apply_operator(word_eval(anti_map(w, table), table, "z"), psi)
    return lhs == rhs


def validate_table(table: GeneratorTable, psi: WaveFunction) -> list[str]:
    """Names of entries whose two realizations disagree on psi."""
    bad = []
    for e in table.entries:
        if apply_operator(e.x_realization, psi) != apply_operator(e.z_realization, psi):
            bad.append(e.name)
    return bad


def exchange_xz(psi: WaveFunction) -> WaveFunction:
    """psi(x, z) -> psi(z, x); the basis symbols must be exchange invariant."""
    if not psi.basis.symmetric:
        raise KernelError("exchange needs a kernel flagged symmetric")
    return WaveFunction(psi.basis, {s: c.swap_xz() for s, c in psi.coefficients.items()})
