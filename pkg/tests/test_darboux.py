import pytest

from bispectral import (
    DiffOperator,
    NonzeroRemainder,
    ad_vanishing_order,
    build_dressing,
    build_K,
    build_Q,
    build_R,
    check_commutativity,
    check_exchange,
    darboux_transform,
    deduce_transformed,
    dual_darboux_transform,
    duality_certificates,
    op_mul,
    parse_function,
    parse_operator,
    repair,
    verify_intertwining,
    word_eval,
)
from bispectral.builtins import builtin_example
from bispectral.darboux import dressing_table
from bispectral.systems import PairValidationError


@pytest.fixture(scope="module")
def weyl1():
    return builtin_example("weyl-n", n=1).pairs["W"]


@pytest.fixture(scope="module")
def airy():
    return builtin_example("airy-product").pairs["A"]


def fg(pair, f, g):
    reg = pair.registry
    return parse_function(f, reg), parse_function(g, reg)


def test_weyl_dressing(weyl1):
    reg = weyl1.registry
    f, g = fg(weyl1, "z1", "x1")
    _, K = build_K(weyl1, f, g)
    _, R = build_R(weyl1, f, g)
    _, Q = build_Q(weyl1, f, g)
    P = lambda t: parse_operator(t, reg)
    assert K == P("x1*D[x1] - 1")
    # from D o x^2 = x^2 D + 2x = x o (x D + 2)
    assert R == P("x1*D[x1] + 2")
    assert Q == P("x1*D[x1] + 2")
    assert op_mul(P("x1^2"), P("D[x1]")) == op_mul(K, P("x1"))
    assert op_mul(P("D[x1]"), P("x1^2")) == op_mul(P("x1"), R)
    assert op_mul(P("D[x1]^2"), P("x1")) == op_mul(Q, P("D[x1]"))


def test_commuting_case():
    pair = builtin_example("weyl-n", n=2).pairs["W"]
    _, Q = build_Q(pair, *fg(pair, "z1", "x2"))
    assert Q == parse_operator("x2*D[x1]", pair.registry)


def test_trivial_g(weyl1):
    reg = weyl1.registry
    f, _ = fg(weyl1, "z1", "x1")
    _, R = build_R(weyl1, f, reg.one)
    assert R == parse_operator("D[x1]", reg)


def test_constant_f_rejected(weyl1):
    with pytest.raises(ValueError, match="positive order"):
        build_K(weyl1, weyl1.registry.const(3), weyl1.registry.var("x1"))


def test_airy_dressing_identities(airy):
    reg = airy.registry
    f, g = fg(airy, "z1^2 + z2", "x1 + s*x2")
    dd = build_dressing(airy, f, g)
    assert (dd.m, dd.n) == (2, 2)
    gop = DiffOperator.scalar(reg, "x", g)
    Lf = dd.L_f
    assert op_mul(gop**3, Lf) == op_mul(dd.K, gop)
    assert op_mul(Lf, gop**3) == op_mul(gop, dd.R)
    assert op_mul(Lf**3, gop) == op_mul(dd.Q, Lf)
    # the word form realizes to the same operator
    assert word_eval(dd.K_word, dressing_table(airy, f, g), "x") == dd.K
    want = parse_operator("(x1+s*x2)*Lf^2 + 6*(D[x1]+s*D[x2])*Lf + 6*s", reg, "x", {"Lf": Lf})
    assert dd.Q == want


def test_weyl_transform_golden(weyl1):
    reg = weyl1.registry
    res = darboux_transform(weyl1, *fg(weyl1, "z1", "x1"))
    assert res.passed
    images = {g.name: g for g in res.system.generators}
    assert images["F"].spectral == parse_function("z1^2", reg)
    assert images["F"].image == parse_operator("D[x1]^2 - 2/x1*D[x1]", reg)
    assert images["Fz1"].spectral == parse_function("z1^3", reg)


def test_dual_transform_mirrors_primal(weyl1):
    f, g = fg(weyl1, "z1", "x1")
    primal = darboux_transform(weyl1, f, g)
    dual = dual_darboux_transform(weyl1, f, g)
    assert dual.passed
    for a, b in zip(primal.system.generators, dual.system.generators):
        assert a.image.exchange_xz() == b.image
        assert a.spectral.swap_xz() == b.spectral


def test_airy_transforms_and_duality(airy):
    f, g = fg(airy, "z1^2 + z2", "x1 + s*x2")
    dd = build_dressing(airy, f, g)
    primal = darboux_transform(airy, f, g, dressing=dd)
    dual = dual_darboux_transform(airy, f, g, dressing=dd)
    assert primal.passed and dual.passed
    assert [c.name for c in primal.certificates] == ["intertwining", "commutativity", "dimension", "denominators"]
    assert check_commutativity(primal.system)[0]
    assert all(c.passed for c in duality_certificates(airy, primal, dual))
    assert check_exchange(airy, dd)[0]
    new = repair(airy, primal, dual, name="At")
    assert len(new.table.entries) == 6


def test_invalid_pair_rejected_before_construction(airy):
    from bispectral import BispectralPair, exponential_kernel

    bad = BispectralPair(airy.primal, airy.dual, exponential_kernel(airy.registry).seed())
    with pytest.raises(PairValidationError):
        dual_darboux_transform(bad, *fg(airy, "z1^2 + z2", "x1 + s*x2"))


def test_verify_intertwining(reg2):
    P = lambda t: parse_operator(t, reg2)
    assert verify_intertwining(P("D[x1]"), P("D[x1]^2"), P("D[x1]^2"))[0]
    ok, defect = verify_intertwining(P("x1"), P("D[x1]"), P("D[x1]"))
    assert not ok and defect == P("-1")


def test_deduce(reg2):
    P = lambda t: parse_operator(t, reg2)
    assert deduce_transformed(P("D[x1]"), P("D[x1]^2"), "x1") == P("D[x1]^2")
    with pytest.raises(NonzeroRemainder) as err:
        deduce_transformed(P("D[x1]"), P("x1"), "x1")
    assert err.value.remainder == P("1")


def test_vanishing_orders(reg2, reg1):
    assert ad_vanishing_order(parse_operator("D[x]", reg1), parse_operator("x", reg1)) == 1
    Lf = parse_operator("D[x1]^2 + D[x2]^2 - x2", reg2)
    assert ad_vanishing_order(Lf, parse_operator("x1 + s*x2", reg2)) == 2
    control = parse_operator("D[x1]^2 + x1^3", reg2)
    assert ad_vanishing_order(control, parse_operator("x1", reg2), max_iter=8) is None
