import random

import pytest

from bispectral import (
    BispectralPair,
    DiffOperator,
    QuantumSystem,
    SpectralGenerator,
    check_commutativity,
    localize,
    parse_function,
    parse_operator,
    spectral_dimension,
)
from bispectral.builtins import builtin_example
from bispectral.systems import NotExpressible, PairValidationError, denominator_confined, jacobian_rank


def test_weyl_commutes():
    s = builtin_example("weyl-n", n=2).systems["W"]
    assert check_commutativity(s) == (True, None)


def test_non_commuting_images(reg2):
    s = QuantumSystem(
        reg2,
        "x",
        [
            SpectralGenerator("a", reg2.var("z1"), parse_operator("D[x1]", reg2)),
            SpectralGenerator("b", reg2.var("z2"), parse_operator("x1", reg2)),
        ],
    )
    assert check_commutativity(s) == (False, ("a", "b"))


def test_spectral_dimension(reg2):
    f = parse_function("z1^2 + z2", reg2)
    gens = lambda polys: QuantumSystem(
        reg2, "x", [SpectralGenerator(f"e{i}", p, DiffOperator.zero(reg2, "x")) for i, p in enumerate(polys)]
    )
    assert spectral_dimension(gens([reg2.var("z1"), reg2.var("z2")])) == 2
    assert spectral_dimension(gens([f**3, f**3 * reg2.var("z1"), f**3 * reg2.var("z2")])) == 2
    assert spectral_dimension(gens([f, f**2])) == 1


def test_power_sums_have_full_rank():
    from bispectral import VariableRegistry

    reg = VariableRegistry(("x1", "x2", "x3"), ("z1", "z2", "z3"))
    polys = [parse_function(f"z1^{k} + z2^{k} + z3^{k}", reg) for k in (1, 2, 3)]
    assert jacobian_rank(polys, ("z1", "z2", "z3"), random.Random(3)) == 3


def test_localize():
    s = builtin_example("weyl-n", n=2).systems["W"]
    reg = s.registry
    p = parse_function("x1*(x1 - x2)", reg)
    loc = localize(s, p)
    assert loc.generators == s.generators
    assert denominator_confined(parse_function("(x1 - x2)^3", reg), loc.localizers)
    assert not denominator_confined(parse_function("x2", reg), loc.localizers)
    assert localize(s, reg.one).localizers == s.localizers


def test_express_and_operator_of():
    s = builtin_example("airy-product").systems["A"]
    reg = s.registry
    L = s.operator_of(parse_function("z1^2 + z2", reg))
    assert L == parse_operator("D[x1]^2 + D[x2]^2 - x2", reg)
    assert s.operator_of(parse_function("s*z1", reg)) == parse_operator("s*D[x1]", reg)
    with pytest.raises(NotExpressible):
        s.operator_of(parse_function("x1", reg))


def test_express_through_non_coordinate_generators(reg1):
    z = reg1.var("z")
    s = QuantumSystem(
        reg1,
        "x",
        [
            SpectralGenerator("a", z**2, parse_operator("D[x]^2", reg1)),
            SpectralGenerator("b", z**3, parse_operator("D[x]^3", reg1)),
        ],
    )
    assert s.operator_of(z**5) == parse_operator("D[x]^5", reg1)
    with pytest.raises(NotExpressible):
        s.operator_of(z)


def test_system_validation(reg2):
    with pytest.raises(ValueError):
        QuantumSystem(reg2, "x", [SpectralGenerator("a", reg2.var("x1"), parse_operator("D[x1]", reg2))])
    with pytest.raises(ValueError):
        QuantumSystem(reg2, "x", [SpectralGenerator("a", reg2.var("z1"), parse_operator("D[z1]", reg2, "z"))])


def test_pair_validation_rejects_wrong_wavefunction():
    s = builtin_example("airy-product")
    from bispectral import exponential_kernel

    with pytest.raises(PairValidationError):
        BispectralPair(s.systems["A"], s.systems["Ad"], exponential_kernel(s.registry).seed()).validate()
