"""Exact differential-operator algebra for bispectral Darboux transformations."""

from .builtins import NAMES as EXAMPLE_NAMES, UnknownExample, builtin_example, example_text
from .darboux import (
    Certificate,
    DressingData,
    FactorizationError,
    NonzeroRemainder,
    NotBispectral,
    TransformResult,
    ad_vanishing_order,
    build_dressing,
    build_K,
    build_Q,
    build_R,
    check_exchange,
    darboux_transform,
    deduce_transformed,
    dual_darboux_transform,
    duality_certificates,
    repair,
    transformed_wavefunction,
    vanishing_report,
    verify_intertwining,
)
from .field import RationalFunction, VariableRegistry, gcd
from .operators import (
    DiffOperator,
    ResourceLimitExceeded,
    UnsupportedDivisor,
    ad_pow,
    apply,
    commutator,
    conjugate_by_function,
    op_mul,
    order,
    resource_limits,
    right_divide,
    right_divide_graded,
)
from .parser import ParseError, parse_expression, parse_function, parse_operator
from .session import Report, Session, SessionError, parse_session, run_session
from .systems import (
    BispectralPair,
    QuantumSystem,
    SpectralGenerator,
    check_commutativity,
    localize,
    spectral_dimension,
)
from .wavefunctions import (
    KernelBasis,
    WaveFunction,
    airy_kernel,
    apply_operator,
    check_duality,
    check_eigen,
    exchange_xz,
    exponential_kernel,
)
from .words import GeneratorTable, TableEntry, WordPoly, anti_map, random_word_poly, word_eval

__version__ = "0.1.0"
