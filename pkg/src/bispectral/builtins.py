"""Built-in sessions.  Each is plain session text, so ``examples show`` doubles as documentation."""

from __future__ import annotations

from .session import Session, parse_session


class UnknownExample(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown example {self.name!r}; available: {', '.join(NAMES)}"


def _weyl_declarations(n: int) -> str:
    xs = ", ".join(f"x{i}" for i in range(1, n + 1))
    zs = ", ".join(f"z{i}" for i in range(1, n + 1))
    primal = "\n".join(f"gen z{i}: z{i} => D[x{i}]" for i in range(1, n + 1))
    dual = "\n".join(f"gen x{i}: x{i} => D[z{i}]" for i in range(1, n + 1))
    return f"""\
[variables]
x = {xs}
z = {zs}

[kernel exp]
builtin = exponential

[system W]
block = x
{primal}

[system Wd]
block = z
{dual}

[pair W]
primal = W
dual = Wd
kernel = exp
"""


def weyl(n: int = 2) -> str:
    if n < 1:
        raise ValueError("weyl-n needs n >= 1")
    # the second iterate has generators of order 9, so commutators reach 18
    return _weyl_declarations(n) + f"""
[limits]
max_order = 20

[task]
commute system=W
commute system=Wd
dimension system=W; expect={n}
words pair=W; count=100; length=4
vanishing pair=W
vanishing pair=W; f=z1; g=x1
iterate pair=W; f=z1; g=x1; name=W1
image system=W1.primal; gen=F; expect=D[x1]^2 - 2*x1^-1*D[x1]
image system=W1.dual; gen=G; expect=D[z1]^2 - 2*z1^-1*D[z1]
vanishing pair=W1; f=z1^2; g=x1^2
iterate pair=W1; f=z1^2; g=x1^2; name=W2
"""


_AIRY_DECLARATIONS = """\
[variables]
x = x1, x2
z = z1, z2
params = s

[kernel psi]
builtin = airy            # exp(x1*z1) Ai(x2 + z2)

[system A]
block = x
gen z1: z1 => D[x1]
gen z2: z2 => D[x2]^2 - x2

[system Ad]
block = z
gen x1: x1 => D[z1]
gen x2: x2 => D[z2]^2 - z2

[pair A]
primal = A
dual = Ad
kernel = psi
"""

AIRY_PRODUCT = _AIRY_DECLARATIONS + """
[task]
commute system=A
commute system=Ad
dimension system=A; expect=2
words pair=A; count=100; length=4
vanishing pair=A
"""

# f = z1^2 + z2 and g = x1 + s*x2; the given K, Q and f-power are compared
# against the values forced by the defining identities.
SEC5_EXAMPLE1 = _AIRY_DECLARATIONS + """
[operators]
Lf = D[x1]^2 + D[x2]^2 - x2
given_K = (x1 + s*x2)^2*(D[x1]^2 + D[x2]^2) - 3*(x1 + s*x2)*s*(D[x1] + s*D[x2]) + ((x1 + s*x2)^2 + 2 + 2*s^2)
given_Q = Lf^2*(x1 + s*x2) + 2*Lf*(D[x1] + s*D[x2]) + 2

[task]
vanishing pair=A; f=z1^2 + z2; g=x1 + s*x2
dressing pair=A; f=z1^2 + z2; g=x1 + s*x2
transform pair=A; f=z1^2 + z2; g=x1 + s*x2; name=At
dual_transform pair=A; f=z1^2 + z2; g=x1 + s*x2; name=Atd
dimension system=At; expect=2
dimension system=Atd; expect=2
duality pair=A; f=z1^2 + z2; g=x1 + s*x2
exchange pair=A; f=z1^2 + z2; g=x1 + s*x2
discrepancy pair=A; f=z1^2 + z2; g=x1 + s*x2; K=given_K; Q=given_Q; fpower=2
"""


def _cm_side(b: str, o: str, prime: str) -> str:
    """Operators of the three-particle system on block ``b`` with spectral block ``o``."""
    return f"""\
[system CM{prime}]
block = {b}
localize = ({b}1 - {b}2)*({b}1 - {b}3)*({b}2 - {b}3)
gen h1{prime}: {o}1 + {o}2 + {o}3 => D[{b}1] + D[{b}2] + D[{b}3]
gen h2{prime}: {o}1^2 + {o}2^2 + {o}3^2 => D[{b}1]^2 + D[{b}2]^2 + D[{b}3]^2 - 4*(({b}1 - {b}2)^-2 + ({b}1 - {b}3)^-2 + ({b}2 - {b}3)^-2)
gen h3{prime}: {o}1^3 + {o}2^3 + {o}3^3 => D[{b}1]^3 + D[{b}2]^3 + D[{b}3]^3 - 6*({b}1 - {b}2)^-2*(D[{b}1] + D[{b}2]) - 6*({b}1 - {b}3)^-2*(D[{b}1] + D[{b}3]) - 6*({b}2 - {b}3)^-2*(D[{b}2] + D[{b}3])
"""


_CM3_DECLARATIONS = (
    """\
[variables]
x = x1, x2, x3
z = z1, z2, z3

[kernel exp]
builtin = exponential

[operators]
x12 = x1 - x2
x13 = x1 - x3
x23 = x2 - x3
d12 = D[x1] - D[x2]
d13 = D[x1] - D[x3]
d23 = D[x2] - D[x3]
K = d12*d13*d23 - 2*x12^-1*d13*d23 - 2*x13^-1*d12*d23 - 2*x23^-1*d12*d13 + 4*x23^-1*x13^-1*d12 + 4*x13^-1*x12^-1*d23 + 4*x12^-1*x23^-1*d13 - 12*x12^-1*x13^-1*x23^-1
Lap = D[x1]^2 + D[x2]^2 + D[x3]^2
H1 = D[x1] + D[x2] + D[x3]
H2 = Lap - 4*(x12^-2 + x13^-2 + x23^-2)

"""
    + _cm_side("x", "z", "")
    + "\n"
    + _cm_side("z", "x", "'")
    + """
# eigenfunction K exp(x.z) / ((z1 - z2)(z1 - z3)(z2 - z3)), symmetric in x and z
[pair CM3]
primal = CM
dual = CM'
kernel = exp
dress = K
normalize = ((z1 - z2)*(z1 - z3)*(z2 - z3))^-1
"""
)

CM3 = _CM3_DECLARATIONS + """
[task]
verify K=K; L=Lap; Lt=H2
verify K=K; L=H1; Lt=H1
deduce K=K; L=D[x1]^3 + D[x2]^3 + D[x3]^3; pivot=graded
commute system=CM
commute system=CM'
dimension system=CM; expect=3
eigen pair=CM3; op=H2; eigenvalue=z1^2 + z2^2 + z3^2
vanishing pair=CM3
"""

CM3_ITERATED = _CM3_DECLARATIONS + """
[task]
vanishing pair=CM3; f=z1^2 + z2^2 + z3^2; g=x1 + x2 + x3
dressing pair=CM3; f=z1^2 + z2^2 + z3^2; g=x1 + x2 + x3
iterate pair=CM3; f=z1^2 + z2^2 + z3^2; g=x1 + x2 + x3; name=CM3b
dimension system=CM3b.primal; expect=3
"""

# The K as given does not divide K o L_{q^3} on the right; the second K (D[x2]
# in the right factor) is homogeneous for the weights x1:1, x2:2 and does.
BK = """\
[variables]
x = x1, x2
z = z1, z2
params = lam

[operators]
tau = x1^2 - x2
q = D[x1]*D[x2] - lam
K = (D[x1] - 2*x1/tau)*(D[x1] + 1/tau) - lam
Kc = (D[x1] - 2*x1/tau)*(D[x2] + 1/tau) - lam
Lq3 = q^3
Lx1q3 = D[x1]*q^3
Lx2q3 = D[x2]*q^3

[task]
deduce K=K; L=Lq3; pivot=x1
deduce K=K; L=Lx1q3; pivot=x1
deduce K=K; L=Lx2q3; pivot=x1
deduce K=Kc; L=Lq3; pivot=graded; name=T1
deduce K=Kc; L=Lx1q3; pivot=graded; name=T2
deduce K=Kc; L=Lx2q3; pivot=graded; name=T3
commute ops=T1, T2, T3
"""

_TEXTS = {
    "weyl-n": weyl,
    "airy-product": lambda: AIRY_PRODUCT,
    "cm3": lambda: CM3,
    "bk": lambda: BK,
    "sec5-example1": lambda: SEC5_EXAMPLE1,
    "cm3-iterated": lambda: CM3_ITERATED,
}

NAMES = tuple(_TEXTS)


def example_text(name: str, n: int | None = None) -> str:
    if name not in _TEXTS:
        raise UnknownExample(name)
    if name == "weyl-n":
        return weyl(2 if n is None else n)
    return _TEXTS[name]()


def builtin_example(name: str, n: int | None = None) -> Session:
    return parse_session(example_text(name, n), name)
