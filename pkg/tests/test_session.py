import json

import pytest

from bispectral import SessionError, parse_session, run_session
from bispectral.builtins import NAMES, UnknownExample, builtin_example, example_text

HEADER = """\
[variables]
x = x1, x2
z = z1, z2
params = s
"""


def run(text, **kw):
    return run_session(parse_session(text, "t"), timing=False, **kw)


def test_empty_task_list():
    rep = run(HEADER)
    assert rep.records == []
    assert rep.exit_code == 0
    assert json.loads(rep.to_json())["tasks"] == []


def test_failing_certificate_prints_defect():
    rep = run(HEADER + "[task]\nverify K=x1; L=D[x1]; Lt=D[x1]\n")
    cert = rep.records[0].certificates[0]
    assert not cert["passed"]
    assert cert["defect"] == "-1"
    assert rep.exit_code == 1
    assert "defect: -1" in rep.to_text()


def test_passing_verify():
    rep = run(HEADER + "[task]\nverify K=D[x1]; L=D[x1]^2; Lt=D[x1]^2\n")
    assert rep.exit_code == 0
    assert rep.records[0].inputs == {"K": "D[x1]", "L": "D[x1]^2", "Lt": "D[x1]^2"}


def test_cm3_verify_task():
    rep = run_session(builtin_example("cm3"), timing=False)
    first = rep.records[0]
    assert first.kind == "verify"
    assert first.certificates[0] == {"name": "intertwining", "passed": True, "detail": "K o L = Lt o K"}


def test_resource_limit_exit_code():
    rep = run(HEADER + "[task]\nshow expr=D[x1]^9*D[x1]^9\n", max_order=16)
    assert rep.records[0].error["type"] == "resource"
    assert rep.exit_code == 3


def test_session_limits_section():
    text = HEADER + "[limits]\nmax_order = 20\n[task]\nshow expr=D[x1]^9*D[x1]^9\n"
    assert run(text).exit_code == 0
    assert run(text, max_order=10).exit_code == 3


def test_unsupported_divisor_is_invalid():
    rep = run(HEADER + "[task]\ndivide a=D[x1]^3; k=D[x1]*D[x2] + D[x1]; pivot=x1\n")
    assert rep.records[0].error["type"] == "invalid"
    assert rep.exit_code == 2


def test_resource_outranks_other_failures():
    text = HEADER + "[task]\nverify K=x1; L=D[x1]; Lt=D[x1]\nshow expr=D[x1]^20\n"
    assert run(text).exit_code == 3


@pytest.mark.parametrize(
    "body, line, column",
    [
        ("[task]\nverify K=x1; L=y; Lt=x1\n", 6, 16),
        ("[task]\nfrobnicate a=1\n", 6, 1),
        ("[task]\nverify K=x1; L=x1\n", 6, 1),
        ("[task]\ncommute system=Nope\n", 6, 16),
        ("[system S]\ngen a: z1 => D[x1\n", 6, 18),
        ("[system S]\nblock = y\n", 6, 9),
        ("[bogus]\n", 5, 2),
        ("[pair P]\nprimal = Q\n", 6, 10),
        ("[operators]\nx1 = D[x2]\n", 6, 1),
        ("[kernel k]\nsymbols = E\nD[x1] E = F\n", 7, 11),
    ],
)
def test_load_errors_carry_positions(body, line, column):
    with pytest.raises(SessionError) as err:
        parse_session(HEADER + body)
    assert (err.value.line, err.value.column) == (line, column)


def test_variables_must_come_first():
    with pytest.raises(SessionError, match="first"):
        parse_session("[task]\n")


def test_custom_kernel_and_pair():
    text = """\
[variables]
x = x
z = z

[kernel e]            # exp(x z) written out by hand
symbols = E
symmetric = yes
D[x] E = z*E
D[z] E = x*E

[system S]
gen z: z => D[x]

[system Sd]
block = z
gen x: x => D[z]

[pair P]
primal = S
dual = Sd
kernel = e
wavefunction = E

[task]
words pair=P; count=20; length=3
exchange pair=P; f=z; g=x
iterate pair=P; f=z; g=x; name=P1
image system=P1.primal; gen=F; expect=D[x]^2 - 2/x*D[x]
"""
    rep = run(text)
    assert rep.exit_code == 0, rep.to_text()


def test_names_defined_by_tasks_resolve_in_order():
    text = HEADER + "[task]\ncommute ops=T, D[x1]\ndeduce K=D[x1]; L=D[x1]^2; name=T\n"
    with pytest.raises(SessionError, match="unknown identifier 'T'"):
        parse_session(text)
    ok = HEADER + "[task]\ndeduce K=D[x1]; L=D[x1]^2; name=T\ncommute ops=T, D[x1]\n"
    assert run(ok).exit_code == 0


def test_determinism():
    a = run_session(builtin_example("airy-product"), seed=5, timing=False).to_json()
    b = run_session(builtin_example("airy-product"), seed=5, timing=False).to_json()
    assert a == b


def test_builtin_names():
    assert NAMES == ("weyl-n", "airy-product", "cm3", "bk", "sec5-example1", "cm3-iterated")
    with pytest.raises(UnknownExample) as err:
        builtin_example("nope")
    for name in NAMES:
        assert name in str(err.value)


def test_builtin_contents():
    cm3 = builtin_example("cm3")
    assert {"K", "H2"} <= set(cm3.operators)
    bk = builtin_example("bk")
    assert {"tau", "q", "K", "Lq3", "Lx1q3", "Lx2q3"} <= set(bk.operators)
    assert "x1^2 - x2" in example_text("bk")
    assert "[limits]" in example_text("weyl-n", 3)


def test_discrepancy_notes():
    rep = run_session(builtin_example("sec5-example1"), timing=False)
    notes = [n for r in rep.records for n in r.notes if n.startswith("DISCREPANCY")]
    assert [n.split(":")[0] for n in notes] == ["DISCREPANCY K", "DISCREPANCY Q", "DISCREPANCY f power"]
    assert "2*s - 2" in notes[1]
    assert rep.exit_code == 0


@pytest.mark.slow
def test_cm3_iterated_session():
    rep = run_session(builtin_example("cm3-iterated"), timing=False)
    assert rep.exit_code == 0
    assert [r.kind for r in rep.records] == ["vanishing", "dressing", "iterate", "dimension"]
    assert all(c["passed"] for r in rep.records for c in r.certificates)
