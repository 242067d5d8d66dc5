import pytest

from bispectral import (
    WordPoly,
    airy_kernel,
    apply_operator,
    check_duality,
    check_eigen,
    exchange_xz,
    exponential_kernel,
    parse_function,
    parse_operator,
)
from bispectral.builtins import builtin_example
from bispectral.wavefunctions import KernelBasis, KernelError, WaveFunction
from bispectral.words import GeneratorTable, TableEntry


def test_exponential_kernel(reg2):
    psi = exponential_kernel(reg2).seed()
    assert apply_operator(parse_operator("D[x1]", reg2), psi) == psi.scale(reg2.var("z1"))
    assert apply_operator(parse_operator("D[z2]", reg2, "z"), psi) == psi.scale(reg2.var("x2"))


def test_airy_kernel(reg2):
    psi = airy_kernel(reg2).seed()
    assert apply_operator(parse_operator("D[x2]^2 - x2", reg2), psi) == psi.scale(reg2.var("z2"))
    assert apply_operator(parse_operator("D[z2]^2 - z2", reg2, "z"), psi) == psi.scale(reg2.var("x2"))


def test_one_step_dressing(reg1):
    psi = exponential_kernel(reg1).seed()
    got = apply_operator(parse_operator("x*D[x] - 1", reg1), psi)
    assert got == psi.scale(parse_function("x*z - 1", reg1))


def test_undeclared_symbol_rejected(reg1):
    with pytest.raises(KernelError, match="basis not closed"):
        KernelBasis(reg1, ("E",), {("x", "E"): {"F": reg1.var("z")}, ("z", "E"): {"E": reg1.var("x")}})


def test_missing_rule_rejected(reg1):
    with pytest.raises(KernelError, match="basis not closed"):
        KernelBasis(reg1, ("E",), {("x", "E"): {"E": reg1.var("z")}})


def test_inconsistent_mixed_partials(reg2):
    rules = {
        ("x1", "E"): {"E": reg2.var("z1")},
        ("x2", "E"): {"E": reg2.var("x1")},
        ("z1", "E"): {"E": reg2.var("x1")},
        ("z2", "E"): {"E": reg2.var("x2")},
    }
    with pytest.raises(KernelError):
        KernelBasis(reg2, ("E",), rules)


def test_check_eigen(reg2):
    psi = exponential_kernel(reg2).seed()
    assert check_eigen(parse_operator("D[x1]^2 + D[x2]^2", reg2), psi, parse_function("z1^2 + z2^2", reg2))
    assert not check_eigen(parse_operator("D[x1]", reg2), psi, reg2.var("z2"))


def test_cm3_eigenfunction():
    s = builtin_example("cm3")
    reg = s.registry
    assert check_eigen(s.operators["H2"], s.pairs["CM3"].wavefunction, parse_function("z1^2 + z2^2 + z3^2", reg))


def test_check_duality_weyl():
    pair = builtin_example("weyl-n", n=1).pairs["W"]
    assert check_duality(WordPoly.letter("L_z1"), pair.table, pair.wavefunction)
    w = WordPoly.word(["L_z1", "x1"])
    assert check_duality(w, pair.table, pair.wavefunction)
    reg = pair.registry
    lhs = apply_operator(parse_operator("x1*D[x1] + 1", reg), pair.wavefunction)
    assert lhs == pair.wavefunction.scale(parse_function("1 + x1*z1", reg))


def test_corrupted_table_detected(reg2):
    psi = exponential_kernel(reg2).seed()
    x = lambda t: parse_operator(t, reg2, "x")
    z = lambda t: parse_operator(t, reg2, "z")
    table = GeneratorTable([TableEntry("x1", x("x1"), "b1", z("D[z2]"))])
    assert not check_duality(WordPoly.letter("x1"), table, psi)


def test_exchange(reg2):
    basis = exponential_kernel(reg2)
    psi = WaveFunction(basis, {"E": parse_function("x1*z2", reg2)})
    assert exchange_xz(psi) == WaveFunction(basis, {"E": parse_function("z1*x2", reg2)})


def test_wavefunction_arithmetic(reg2):
    psi = airy_kernel(reg2).seed()
    assert (psi - psi).is_zero()
    assert psi + psi == psi.scale(2)
    with pytest.raises(KernelError):
        WaveFunction(psi.basis, {"Q": 1})
