"""Session files: declarations of variables, kernels, systems and pairs, plus tasks.

A session is sectioned plain text::

    [variables]
    x = x1, x2
    z = z1, z2
    params = s

    [kernel psi]
    builtin = airy

    [system S]
    block = x
    gen z1: z1 => D[x1]
    gen z2: z2 => D[x2]^2 - x2

    [operators]
    H = D[x1]^2 + D[x2]^2

    [pair P]
    primal = S
    dual = Sd
    kernel = psi

    [task]
    transform pair=P; f=z1^2 + z2; g=x1 + s*x2

``#`` starts a comment.  Every name is resolved while the file is read, so a
session that loads is a session whose tasks can run.
"""

from __future__ import annotations

import json
import random
import re
import time
from dataclasses import dataclass, field
from typing import Callable

from .darboux import (
    Certificate,
    FactorizationError,
    NonzeroRemainder,
    NotBispectral,
    build_dressing,
    check_exchange,
    darboux_transform,
    deduce_transformed,
    dual_darboux_transform,
    duality_certificates,
    repair,
    vanishing_report,
    ad_vanishing_order,
    verify_intertwining,
)
from .field import RationalFunction, VariableRegistry
from .operators import (
    DiffOperator,
    ResourceLimitExceeded,
    UnsupportedDivisor,
    commutator,
    op_mul,
    resource_limits,
    right_divide,
    right_divide_graded,
)
from .parser import ParseError, parse_expression, parse_linear_form
from .systems import (
    BispectralPair,
    NotExpressible,
    PairValidationError,
    QuantumSystem,
    SpectralGenerator,
    check_commutativity,
    localize,
    spectral_dimension,
)
from .wavefunctions import (
    KernelBasis,
    KernelError,
    WaveFunction,
    airy_kernel,
    apply_operator,
    check_duality,
    check_eigen,
    exponential_kernel,
)
from .words import random_word_poly

EXIT_OK, EXIT_CERTIFICATE, EXIT_INVALID, EXIT_RESOURCE = 0, 1, 2, 3

DEFAULT_MAX_ORDER = 16
DEFAULT_MAX_TERMS = 200_000


class SessionError(ParseError):
    """Malformed or unresolvable session text; carries line and column."""


@dataclass
class Task:
    kind: str
    args: dict[str, str]
    line: int
    columns: dict[str, int] = field(default_factory=dict)


@dataclass
class Session:
    name: str
    registry: VariableRegistry
    kernels: dict[str, KernelBasis] = field(default_factory=dict)
    systems: dict[str, QuantumSystem] = field(default_factory=dict)
    operators: dict[str, object] = field(default_factory=dict)
    pairs: dict[str, BispectralPair] = field(default_factory=dict)
    tasks: list[Task] = field(default_factory=list)
    limits: dict[str, int] = field(default_factory=dict)


# -- reading ---------------------------------------------------------------

_HEADER = re.compile(r"\[\s*(\w+)(?:\s+([A-Za-z_][\w']*))?\s*\]$")


def _strip(line: str) -> str:
    i = line.find("#")
    return (line if i < 0 else line[:i]).rstrip()


def _names(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


class _Reader:
    def __init__(self, text: str, name: str):
        self.name = name
        self.lines = text.splitlines()
        self.session: Session | None = None
        self.line_no = 0

    def fail(self, message: str, column: int = 1):
        return SessionError(message, self.line_no, column)

    def relocate(self, exc: ParseError, column: int):
        # expression errors are reported relative to the expression text
        return SessionError(exc.message, self.line_no, column + exc.column - 1)

    # expression helpers; ``column`` is where the expression starts on the line

    def expr(self, text: str, column: int):
        try:
            return parse_expression(text, self.registry, self.session.operators if self.session else None)
        except ParseError as exc:
            raise self.relocate(exc, column) from None

    def function(self, text: str, column: int) -> RationalFunction:
        v = self.expr(text, column)
        if isinstance(v, DiffOperator):
            if not v.is_function():
                raise self.fail("expected a function, found an operator of positive order", column)
            return v.as_function()
        return v

    def operator(self, text: str, column: int, block: str) -> DiffOperator:
        v = self.expr(text, column)
        if isinstance(v, RationalFunction):
            return DiffOperator.scalar(self.registry, block, v)
        if v.block != block:
            raise self.fail(f"operator acts on the {v.block} block, expected {block}", column)
        return v

    @property
    def registry(self) -> VariableRegistry:
        if self.session is None:
            raise self.fail("[variables] must come first")
        return self.session.registry

    # sections

    def read(self) -> Session:
        sections: list[tuple[str, str | None, int, list[tuple[int, str]]]] = []
        for no, raw in enumerate(self.lines, 1):
            self.line_no = no
            line = _strip(raw)
            if not line.strip():
                continue
            m = _HEADER.match(line.strip())
            if m:
                sections.append((m.group(1), m.group(2), no, []))
            elif not sections:
                raise self.fail("declaration outside any section", len(line) - len(line.lstrip()) + 1)
            else:
                sections[-1][3].append((no, line))
        handlers: dict[str, Callable] = {
            "variables": self.variables,
            "kernel": self.kernel,
            "system": self.system,
            "operators": self.operators,
            "pair": self.pair,
            "task": self.tasks,
            "tasks": self.tasks,
            "limits": self.limits,
        }
        for kind, arg, no, body in sections:
            self.line_no = no
            if kind not in handlers:
                raise self.fail(f"unknown section [{kind}]", 2)
            needs_name = kind in ("kernel", "system", "pair")
            if needs_name and not arg:
                raise self.fail(f"section [{kind}] needs a name", 2)
            if not needs_name and arg:
                raise self.fail(f"section [{kind}] takes no name", 2)
            if kind != "variables" and self.session is None:
                raise self.fail("[variables] must come first", 1)
            handlers[kind](arg, body) if needs_name else handlers[kind](body)
        if self.session is None:
            self.line_no = len(self.lines)
            raise self.fail("session declares no [variables]")
        return self.session

    def pairs_of(self, body, allowed: tuple[str, ...] | None = None, repeat=()) -> dict[str, list[tuple[str, int]]]:
        out: dict[str, list[tuple[str, int]]] = {}
        for no, line in body:
            self.line_no = no
            key, sep, value = line.partition("=")
            if not sep:
                raise self.fail("expected 'key = value'", len(line) - len(line.lstrip()) + 1)
            key = key.strip()
            if allowed is not None and key not in allowed:
                raise self.fail(f"unknown key {key!r}", line.index(key) + 1)
            if key in out and key not in repeat:
                raise self.fail(f"duplicate key {key!r}", line.index(key) + 1)
            col = len(line) - len(value.lstrip()) + 1
            out.setdefault(key, []).append((value.strip(), col, no))
        return out

    def variables(self, body):
        if self.session is not None:
            raise self.fail("[variables] declared twice")
        kv = self.pairs_of(body, ("x", "z", "params"))
        get = lambda k: _names(kv[k][0][0]) if k in kv else ()
        try:
            reg = VariableRegistry(get("x"), get("z"), get("params"))
        except ValueError as exc:
            raise self.fail(str(exc)) from None
        self.session = Session(self.name, reg)

    def kernel(self, name, body):
        reg = self.registry
        rules: dict[tuple[str, str], dict] = {}
        settings = {}
        rule_lines = []
        for no, line in body:
            self.line_no = no
            if line.lstrip().startswith("D["):
                rule_lines.append((no, line))
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise self.fail("expected 'key = value' or a rule 'D[var] SYMBOL = ...'")
            settings[key.strip()] = value.strip()
        unknown = set(settings) - {"builtin", "symbols", "symmetric", "airy_index"}
        if unknown:
            raise self.fail(f"unknown kernel setting {sorted(unknown)[0]!r}")
        try:
            if "builtin" in settings:
                kind = settings["builtin"]
                if kind == "exponential":
                    basis = exponential_kernel(reg)
                elif kind == "airy":
                    basis = airy_kernel(reg, int(settings.get("airy_index", "-1")))
                else:
                    raise self.fail(f"unknown builtin kernel {kind!r} (exponential, airy)")
            else:
                symbols = _names(settings.get("symbols", ""))
                if not symbols:
                    raise self.fail("kernel needs 'symbols = ...' or 'builtin = ...'")
                for no, line in rule_lines:
                    self.line_no = no
                    m = re.match(r"\s*D\[\s*(\w+)\s*\]\s*([A-Za-z_][\w']*)\s*=\s*", line)
                    if not m:
                        raise self.fail("rule must read 'D[var] SYMBOL = linear form'")
                    try:
                        form = parse_linear_form(line[m.end() :], reg, symbols)
                    except ParseError as exc:
                        raise self.relocate(exc, m.end() + 1) from None
                    rules[m.group(1), m.group(2)] = form
                symmetric = settings.get("symmetric", "no").lower() in ("yes", "true", "1")
                basis = KernelBasis(reg, symbols, rules, symmetric)
        except KernelError as exc:
            raise self.fail(str(exc)) from None
        self.session.kernels[name] = basis

    def system(self, name, body):
        reg = self.registry
        block = "x"
        localizers = []
        gens = []
        for no, line in body:
            self.line_no = no
            stripped = line.strip()
            if stripped.startswith("gen "):
                head, arrow, image = line.partition("=>")
                if not arrow:
                    raise self.fail("generator line must read 'gen NAME: POLY => OPERATOR'")
                m = re.match(r"\s*gen\s+([A-Za-z_][\w']*)\s*:\s*", head)
                if not m:
                    raise self.fail("generator line must read 'gen NAME: POLY => OPERATOR'")
                poly_col = m.end() + 1
                poly = self.function(head[m.end() :], poly_col)
                img_col = len(head) + 2 + (len(image) - len(image.lstrip())) + 1
                op = self.operator(image.strip(), img_col, block)
                gens.append(SpectralGenerator(m.group(1), poly, op))
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            col = len(key) + (len(line) - len(line.lstrip())) + 1
            col = line.index("=") + 2 + (len(value) - len(value.lstrip())) if sep else col
            if key == "block":
                if gens:
                    raise self.fail("'block' must precede the generators")
                block = value.strip()
                if block not in ("x", "z"):
                    raise self.fail("block must be x or z", col)
            elif key == "localize":
                localizers.append(self.function(value.strip(), col))
            else:
                raise self.fail(f"unknown system setting {key!r}")
        try:
            s = QuantumSystem(reg, block, tuple(gens), name=name)
            for p in localizers:
                s = localize(s, p)
        except (ValueError, ZeroDivisionError) as exc:
            raise self.fail(f"system {name}: {exc}") from None
        self.session.systems[name] = s

    def operators(self, body):
        for no, line in body:
            self.line_no = no
            m = re.match(r"\s*([A-Za-z_][\w']*)\s*=\s*", line)
            if not m:
                raise self.fail("expected 'NAME = expression'")
            name = m.group(1)
            if name in self.registry.names or name == "D":
                raise self.fail(f"{name!r} is a variable name", m.start(1) + 1)
            self.session.operators[name] = self.expr(line[m.end() :], m.end() + 1)

    def pair(self, name, body):
        kv = self.pairs_of(body, ("primal", "dual", "kernel", "wavefunction", "dress", "normalize"))
        s = self.session

        def lookup(key, table, what):
            if key not in kv:
                raise self.fail(f"pair {name}: missing '{key}'")
            value, col, no = kv[key][0]
            self.line_no = no
            if value not in table:
                raise self.fail(f"unknown {what} {value!r}", col)
            return table[value]

        primal = lookup("primal", s.systems, "system")
        dual = lookup("dual", s.systems, "system")
        basis = lookup("kernel", s.kernels, "kernel")
        psi = basis.seed()
        if "wavefunction" in kv:
            value, col, no = kv["wavefunction"][0]
            self.line_no = no
            if value != "seed":
                try:
                    psi = WaveFunction(basis, parse_linear_form(value, s.registry, basis.symbols))
                except ParseError as exc:
                    raise self.relocate(exc, col) from None
        if "dress" in kv:
            value, col, no = kv["dress"][0]
            self.line_no = no
            psi = apply_operator(self.operator(value, col, "x"), psi)
        if "normalize" in kv:
            value, col, no = kv["normalize"][0]
            self.line_no = no
            psi = psi.scale(self.function(value, col))
        try:
            p = BispectralPair(primal, dual, psi, name=name)
            p.validate()
        except (ValueError, PairValidationError) as exc:
            raise self.fail(str(exc)) from None
        s.pairs[name] = p

    def limits(self, body):
        for key, entries in self.pairs_of(body, ("max_order", "max_terms")).items():
            value, col, no = entries[0]
            self.line_no = no
            if not value.isdigit() or int(value) < 1:
                raise self.fail(f"{key} must be a positive integer", col)
            self.session.limits[key] = int(value)

    def tasks(self, body):
        for no, line in body:
            self.line_no = no
            m = re.match(r"\s*([a-z_]+)\s*", line)
            if not m:
                raise self.fail("task line must start with a task kind")
            kind = m.group(1)
            if kind not in TASKS:
                raise self.fail(f"unknown task kind {kind!r}", m.start(1) + 1)
            args: dict[str, str] = {}
            columns: dict[str, int] = {}
            pos = m.end()
            rest = line[pos:]
            offset = pos
            for part in rest.split(";"):
                if part.strip():
                    key, sep, value = part.partition("=")
                    key = key.strip()
                    start = offset + len(part) - len(part.lstrip()) + 1
                    if not sep or not re.fullmatch(r"[A-Za-z_]\w*", key):
                        raise self.fail("task arguments must read 'key=value; ...'", start)
                    if key in args:
                        raise self.fail(f"duplicate argument {key!r}", start)
                    args[key] = value.strip()
                    columns[key] = offset + len(part) - len(value) + (len(value) - len(value.lstrip())) + 1
                offset += len(part) + 1
            self.session.tasks.append(Task(kind, args, no, columns))


# argument kinds: e expression, l comma-separated expressions, p pair, s system,
# i integer, w plain word; an upper-case letter marks a required argument.
# ``name`` defines an operator (o), system (S) or pair (P) for later tasks.
_ARGS: dict[str, dict[str, str]] = {
    "verify": {"K": "E", "L": "E", "Lt": "E"},
    "equal": {"a": "E", "b": "E"},
    "commute": {"system": "s", "ops": "l"},
    "deduce": {"K": "E", "L": "E", "pivot": "w", "expect": "e", "name": "o"},
    "divide": {"a": "E", "k": "E", "pivot": "w"},
    "vanishing": {"pair": "p", "L": "e", "f": "e", "g": "e", "max_iter": "i", "expect": "w"},
    "dressing": {"pair": "P", "f": "E", "g": "E"},
    "transform": {"pair": "P", "f": "E", "g": "E", "name": "S"},
    "dual_transform": {"pair": "P", "f": "E", "g": "E", "name": "S"},
    "iterate": {"pair": "P", "f": "E", "g": "E", "name": "P", "prefix": "w", "dual_prefix": "w"},
    "duality": {"pair": "P", "f": "E", "g": "E", "prefix": "w", "dual_prefix": "w"},
    "exchange": {"pair": "P", "f": "E", "g": "E"},
    "words": {"pair": "P", "count": "i", "length": "i"},
    "eigen": {"pair": "P", "op": "E", "eigenvalue": "E"},
    "dimension": {"system": "S", "expect": "i"},
    "image": {"system": "S", "gen": "W", "expect": "e"},
    "discrepancy": {"pair": "P", "f": "E", "g": "E", "K": "e", "Q": "e", "fpower": "i"},
    "show": {"expr": "e", "system": "s", "pair": "p"},
}
_REQUIRED_NAME = {"iterate"}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")


def _check_tasks(session: Session) -> None:
    """Resolve every name a task mentions, following names defined by earlier tasks."""
    known = set(session.registry.names) | set(session.operators) | {"D"}
    systems, pairs = set(session.systems), set(session.pairs)
    pending: set[str] = set()
    for t in session.tasks:
        schema = _ARGS[t.kind]

        def fail(message, key=None):
            return SessionError(message, t.line, t.columns.get(key, 1))

        for key in t.args:
            if key not in schema:
                raise fail(f"task {t.kind} takes no argument {key!r}", key)
        for key, kind in schema.items():
            if kind.isupper() and key not in t.args and not (key == "name" and t.kind not in _REQUIRED_NAME):
                raise fail(f"task {t.kind} needs '{key}='")
        for key, value in t.args.items():
            kind = schema[key].lower()
            if key == "name":
                continue
            if kind in "el":
                idents = [m for m in _IDENT.finditer(value)]
                for m in idents:
                    if m.group() not in known:
                        raise SessionError(f"unknown identifier {m.group()!r}", t.line, t.columns[key] + m.start())
                if kind == "e" and all(m.group() not in pending for m in idents):
                    # fully declared: parse now so syntax errors surface at load time
                    try:
                        parse_expression(value, session.registry, session.operators)
                    except ParseError as exc:
                        raise SessionError(exc.message, t.line, t.columns[key] + exc.column - 1) from None
            elif kind == "p" and value not in pairs:
                raise fail(f"unknown pair {value!r}", key)
            elif kind == "s" and value not in systems:
                raise fail(f"unknown system {value!r}", key)
            elif kind == "i" and not re.fullmatch(r"-?\d+", value):
                raise fail(f"'{key}' must be an integer", key)
        if "name" in t.args:
            new = t.args["name"]
            kind = schema["name"].lower()
            if kind == "o":
                known.add(new)
                pending.add(new)
            elif kind == "s":
                systems.add(new)
            else:
                pairs.add(new)
                systems.update((new + ".primal", new + ".dual"))


def parse_session(text: str, name: str = "session") -> Session:
    session = _Reader(text, name).read()
    _check_tasks(session)
    return session


# -- reports -----------------------------------------------------------------


@dataclass
class TaskRecord:
    task: int
    kind: str
    inputs: dict[str, str] = field(default_factory=dict)
    certificates: list[dict] = field(default_factory=list)
    derived: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    millis: int | None = None
    error: dict | None = None

    def certify(self, name: str, passed: bool, detail: str = "", defect=None) -> bool:
        entry = {"name": name, "passed": bool(passed), "detail": detail}
        if defect is not None and not passed:
            entry["defect"] = str(defect)
        self.certificates.append(entry)
        return passed

    def add_certificates(self, certs, prefix: str = "") -> None:
        for c in certs:
            self.certify(prefix + c.name, c.passed, c.detail)

    def derive(self, name: str, value) -> None:
        self.derived.append({"name": name, "value": str(value)})

    def as_dict(self) -> dict:
        out = {
            "task": self.task,
            "kind": self.kind,
            "inputs": self.inputs,
            "certificates": self.certificates,
            "derived": self.derived,
            "notes": self.notes,
            "millis": self.millis,
        }
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class Report:
    session: str
    seed: int
    records: list[TaskRecord] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        kinds = {r.error["type"] for r in self.records if r.error}
        if "resource" in kinds:
            return EXIT_RESOURCE
        if "invalid" in kinds:
            return EXIT_INVALID
        if any(not c["passed"] for r in self.records for c in r.certificates):
            return EXIT_CERTIFICATE
        return EXIT_OK

    def as_dict(self) -> dict:
        passed = sum(c["passed"] for r in self.records for c in r.certificates)
        total = sum(len(r.certificates) for r in self.records)
        return {
            "session": self.session,
            "seed": self.seed,
            "tasks": [r.as_dict() for r in self.records],
            "summary": {"certificates": total, "passed": passed, "exit_code": self.exit_code},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, ensure_ascii=False)

    def to_text(self) -> str:
        out = [f"session {self.session} (seed {self.seed})"]
        for r in self.records:
            timing = f"  [{r.millis} ms]" if r.millis is not None else ""
            out.append(f"\n== task {r.task}: {r.kind}{timing}")
            for k, v in r.inputs.items():
                out.append(f"  {k} = {v}")
            for c in r.certificates:
                mark = "PASS" if c["passed"] else "FAIL"
                detail = f" ({c['detail']})" if c["detail"] else ""
                out.append(f"  [{mark}] {c['name']}{detail}")
                if "defect" in c:
                    out.append(f"         defect: {c['defect']}")
            for d in r.derived:
                out.append(f"  {d['name']} = {d['value']}")
            for n in r.notes:
                out.append(f"  note: {n}")
            if r.error:
                out.append(f"  error ({r.error['type']}): {r.error['message']}")
        s = self.as_dict()["summary"]
        out.append(f"\n{s['passed']}/{s['certificates']} certificates passed; exit code {s['exit_code']}")
        return "\n".join(out)


# -- running ---------------------------------------------------------------


class _Invalid(ValueError):
    pass


class _Runner:
    def __init__(self, session: Session, seed: int):
        self.s = session
        self.reg = session.registry
        self.seed = seed

    # argument access

    def raw(self, task: Task, key: str, default=None) -> str:
        if key in task.args:
            return task.args[key]
        if default is not None:
            return default
        raise _Invalid(f"line {task.line}: task {task.kind} needs '{key}='")

    def value(self, task: Task, key: str):
        text = self.raw(task, key)
        try:
            return parse_expression(text, self.reg, self.s.operators)
        except ParseError as exc:
            col = task.columns.get(key, 1) + exc.column - 1
            raise _Invalid(f"line {task.line}, column {col}: {exc.message}") from None

    def op(self, task: Task, key: str, block: str | None = None) -> DiffOperator:
        v = self.value(task, key)
        if isinstance(v, RationalFunction):
            return DiffOperator.scalar(self.reg, block or "x", v)
        if block is not None and v.block != block:
            raise _Invalid(f"line {task.line}: '{key}' acts on the {v.block} block, expected {block}")
        return v

    def fn(self, task: Task, key: str) -> RationalFunction:
        v = self.value(task, key)
        if isinstance(v, DiffOperator):
            if not v.is_function():
                raise _Invalid(f"line {task.line}: '{key}' must be a function")
            return v.as_function()
        return v

    def named(self, task: Task, key: str, table: dict, what: str):
        name = self.raw(task, key)
        if name not in table:
            raise _Invalid(f"line {task.line}: unknown {what} {name!r}")
        return table[name]

    def integer(self, task: Task, key: str, default: int) -> int:
        text = self.raw(task, key, str(default))
        try:
            return int(text)
        except ValueError:
            raise _Invalid(f"line {task.line}: '{key}' must be an integer") from None

    def rng(self, task: Task) -> random.Random:
        return random.Random(f"{self.seed}:{task.line}")


def _echo(rec: TaskRecord, key: str, value) -> None:
    rec.inputs[key] = str(value)


def _system_lines(rec: TaskRecord, system: QuantumSystem, label: str) -> None:
    for g in system.generators:
        rec.derive(f"{label}.{g.name} [{g.spectral}]", g.image)


# task implementations: each fills the record and may raise


def _t_verify(r: _Runner, t: Task, rec: TaskRecord):
    K = r.op(t, "K")
    L, Lt = r.op(t, "L", K.block), r.op(t, "Lt", K.block)
    for k, v in (("K", K), ("L", L), ("Lt", Lt)):
        _echo(rec, k, v)
    ok, defect = verify_intertwining(K, L, Lt)
    rec.certify("intertwining", ok, "K o L = Lt o K", defect)


def _t_equal(r: _Runner, t: Task, rec: TaskRecord):
    a, b = r.value(t, "a"), r.value(t, "b")
    _echo(rec, "a", a)
    _echo(rec, "b", b)
    diff = a - b if type(a) is type(b) else None
    if diff is None:
        rec.certify("equal", False, "an operator and a function")
    else:
        rec.certify("equal", diff.is_zero(), "", diff)


def _t_commute(r: _Runner, t: Task, rec: TaskRecord):
    if "system" in t.args:
        s = r.named(t, "system", r.s.systems, "system")
        _echo(rec, "system", t.args["system"])
        ok, pair = check_commutativity(s)
        rec.certify("commutativity", ok, f"{len(s.generators)} generators" if ok else f"[{pair[0]}, {pair[1]}] != 0")
        return
    exprs = [e.strip() for e in r.raw(t, "ops").split(",")]
    ops = []
    for i, e in enumerate(exprs):
        sub = Task(t.kind, {"op": e}, t.line)
        ops.append(r.op(sub, "op"))
        _echo(rec, f"op{i + 1}", ops[-1])
    for i in range(len(ops)):
        for j in range(i + 1, len(ops)):
            c = commutator(ops[i], ops[j])
            rec.certify(f"[op{i + 1}, op{j + 1}] = 0", c.is_zero(), "", c)


def _pivot(r: _Runner, t: Task, block: str) -> str | None:
    pivot = r.raw(t, "pivot", "graded")
    if pivot == "graded":
        return None
    if pivot not in r.reg.block_vars(block):
        raise _Invalid(f"line {t.line}: pivot {pivot!r} is not a variable of block {block}")
    return pivot


def _t_deduce(r: _Runner, t: Task, rec: TaskRecord):
    K = r.op(t, "K")
    L = r.op(t, "L", K.block)
    pivot = _pivot(r, t, K.block)
    _echo(rec, "K", K)
    _echo(rec, "L", L)
    _echo(rec, "pivot", pivot or "graded")
    try:
        Lt = deduce_transformed(K, L, pivot)
    except NonzeroRemainder as exc:
        rec.certify("remainder zero", False, "K o L is not a left multiple of K", exc.remainder)
        return
    rec.certify("remainder zero", True)
    rec.derive("Lt", Lt)
    if "expect" in t.args:
        expected = r.op(t, "expect", K.block)
        rec.certify("matches expected", Lt == expected, "", Lt - expected)
    if "name" in t.args:
        r.s.operators[t.args["name"]] = Lt
        rec.notes.append(f"quotient stored as {t.args['name']}")


def _t_divide(r: _Runner, t: Task, rec: TaskRecord):
    a = r.op(t, "a")
    k = r.op(t, "k", a.block)
    pivot = _pivot(r, t, a.block)
    _echo(rec, "a", a)
    _echo(rec, "k", k)
    _echo(rec, "pivot", pivot or "graded")
    q, rem = right_divide(a, k, pivot) if pivot else right_divide_graded(a, k)
    rec.derive("quotient", q)
    rec.derive("remainder", rem)
    back = op_mul(q, k) + rem
    rec.certify("quotient o k + remainder = a", back == a, "", back - a)


def _t_vanishing(r: _Runner, t: Task, rec: TaskRecord):
    if "pair" in t.args:
        pair = r.named(t, "pair", r.s.pairs, "pair")
        _echo(rec, "pair", t.args["pair"])
        if "f" in t.args:
            f, g = r.fn(t, "f"), r.fn(t, "g")
            _echo(rec, "f", f)
            _echo(rec, "g", g)
            Lf = pair.primal.operator_of(f)
            n = pair.dual.operator_of(g).order()
            got = ad_vanishing_order(Lf, DiffOperator.scalar(r.reg, "x", g), max_iter=n + 2)
            rec.derive("ord L'_g", n)
            rec.derive("vanishing order", got if got is not None else "none")
            rec.certify("ad_(L_f)^(n+1)(g) = 0", got is not None and got <= n, f"n = {n}")
            return
        for e, w, n, got in vanishing_report(pair):
            rec.certify(f"ad_(L_{e})^{n + 1}({w}) = 0", got is not None and got <= n, f"vanishing order {got}")
        return
    L = r.op(t, "L")
    g = r.op(t, "g", L.block)
    max_iter = r.integer(t, "max_iter", 8)
    _echo(rec, "L", L)
    _echo(rec, "g", g)
    rec.inputs["max_iter"] = str(max_iter)
    got = ad_vanishing_order(L, g, max_iter)
    if got is None:
        rec.derive("vanishing order", "none")
        rec.notes.append(f"ad-powers did not vanish within {max_iter} steps: evidence against bispectrality")
    else:
        rec.derive("vanishing order", got)
    expect = t.args.get("expect")
    if expect is not None:
        want = None if expect == "none" else int(expect)
        rec.certify("vanishing order as expected", got == want, f"expected {expect}, found {got if got is not None else 'none'}")


def _dressing_args(r: _Runner, t: Task, rec: TaskRecord):
    pair = r.named(t, "pair", r.s.pairs, "pair")
    f, g = r.fn(t, "f"), r.fn(t, "g")
    _echo(rec, "pair", t.args["pair"])
    _echo(rec, "f", f)
    _echo(rec, "g", g)
    return pair, f, g


def _dressing(pair, f, g, rec: TaskRecord):
    try:
        dd = build_dressing(pair, f, g)
    except (FactorizationError, NotBispectral) as exc:
        rec.certify("dressing identities", False, str(exc))
        return None
    rec.certify("g^(m+1) o L_f = K o g", True)
    rec.certify("L_f o g^(m+1) = g o R", True)
    rec.certify("L_f^(n+1) o g = Q o L_f", True, f"m = {dd.m}, n = {dd.n}")
    return dd


def _t_dressing(r: _Runner, t: Task, rec: TaskRecord):
    pair, f, g = _dressing_args(r, t, rec)
    dd = _dressing(pair, f, g, rec)
    if dd is None:
        return
    rec.derive("m", dd.m)
    rec.derive("n", dd.n)
    rec.derive("K word", dd.K_word)
    rec.derive("K", dd.K)
    rec.derive("R", dd.R)
    rec.derive("Q", dd.Q)
    rec.derive("b(K)", dd.bK())


def _run_transform(r, t, rec, dual: bool):
    pair, f, g = _dressing_args(r, t, rec)
    dd = _dressing(pair, f, g, rec)
    if dd is None:
        return None, None
    fn = dual_darboux_transform if dual else darboux_transform
    res = fn(pair, f, g, dressing=dd, seed=r.seed, strict=False)
    rec.add_certificates(res.certificates)
    return dd, res


def _t_transform(r: _Runner, t: Task, rec: TaskRecord, dual: bool = False):
    dd, res = _run_transform(r, t, rec, dual)
    if res is None:
        return
    rec.derive("dresser", res.dresser)
    _system_lines(rec, res.system, "generator")
    rec.derive("localizers", ", ".join(map(str, res.system.localizers)))
    if "name" in t.args:
        r.s.systems[t.args["name"]] = res.system
        rec.notes.append(f"transformed system stored as {t.args['name']}")


def _t_dual_transform(r, t, rec):
    _t_transform(r, t, rec, dual=True)


def _both(r: _Runner, t: Task, rec: TaskRecord):
    pair, f, g = _dressing_args(r, t, rec)
    dd = _dressing(pair, f, g, rec)
    if dd is None:
        return pair, None, None, None
    primal = darboux_transform(pair, f, g, dressing=dd, seed=r.seed, strict=False, prefix=r.raw(t, "prefix", "F"))
    dual = dual_darboux_transform(pair, f, g, dressing=dd, seed=r.seed, strict=False, prefix=r.raw(t, "dual_prefix", "G"))
    rec.add_certificates(primal.certificates, "primal ")
    rec.add_certificates(dual.certificates, "dual ")
    return pair, dd, primal, dual


def _t_duality(r: _Runner, t: Task, rec: TaskRecord):
    pair, dd, primal, dual = _both(r, t, rec)
    if dd is not None:
        rec.add_certificates(duality_certificates(pair, primal, dual))


def _t_iterate(r: _Runner, t: Task, rec: TaskRecord):
    pair, dd, primal, dual = _both(r, t, rec)
    if dd is None:
        return
    rec.add_certificates(duality_certificates(pair, primal, dual))
    name = r.raw(t, "name")
    if not all(c["passed"] for c in rec.certificates):
        rec.notes.append(f"certificates failed; {name} not defined")
        return
    try:
        new = repair(pair, primal, dual, name=name)
    except PairValidationError as exc:
        rec.certify("re-paired table", False, str(exc))
        return
    rec.certify("re-paired table", True, f"wavefunction K psi validates {len(new.table.entries)} generators")
    r.s.pairs[name] = new
    r.s.systems[name + ".primal"] = new.primal
    r.s.systems[name + ".dual"] = new.dual
    _system_lines(rec, new.primal, "primal")
    _system_lines(rec, new.dual, "dual")
    rec.notes.append(f"new pair stored as {name} (systems {name}.primal, {name}.dual)")


def _t_exchange(r: _Runner, t: Task, rec: TaskRecord):
    pair, f, g = _dressing_args(r, t, rec)
    dd = _dressing(pair, f, g, rec)
    if dd is None:
        return
    ok, lhs, rhs = check_exchange(pair, dd)
    rec.certify("exchange(K psi) = b(K) psi", ok, "b(K) read in the dual frame", None if ok else f"{lhs} vs {rhs}")
    rec.derive("K psi", apply_operator(dd.K, pair.wavefunction))


def _t_words(r: _Runner, t: Task, rec: TaskRecord):
    pair = r.named(t, "pair", r.s.pairs, "pair")
    count = r.integer(t, "count", 100)
    length = r.integer(t, "length", 4)
    rec.inputs.update(pair=t.args["pair"], count=str(count), length=str(length))
    rng = r.rng(t)
    letters = [e.name for e in pair.table.entries]
    failures = []
    for _ in range(count):
        w = random_word_poly(rng, letters, max_length=length)
        if not check_duality(w, pair.table, pair.wavefunction):
            failures.append(str(w))
    rec.certify("w psi = b(w) psi", not failures, f"{count - len(failures)}/{count} random words", failures[0] if failures else None)


def _t_eigen(r: _Runner, t: Task, rec: TaskRecord):
    pair = r.named(t, "pair", r.s.pairs, "pair")
    op = r.op(t, "op")
    ev = r.fn(t, "eigenvalue")
    psi = pair.wavefunction
    rec.inputs.update(pair=t.args["pair"], op=str(op), eigenvalue=str(ev))
    ok = check_eigen(op, psi, ev)
    rec.certify("op psi = eigenvalue psi", ok, "", None if ok else apply_operator(op, psi) - psi.scale(ev))


def _t_dimension(r: _Runner, t: Task, rec: TaskRecord):
    s = r.named(t, "system", r.s.systems, "system")
    _echo(rec, "system", t.args["system"])
    dim = spectral_dimension(s, r.rng(t))
    rec.derive("spectral dimension", dim)
    if "expect" in t.args:
        want = r.integer(t, "expect", 0)
        rec.certify("dimension as expected", dim == want, f"expected {want}, found {dim}")


def _t_image(r: _Runner, t: Task, rec: TaskRecord):
    s = r.named(t, "system", r.s.systems, "system")
    name = r.raw(t, "gen")
    try:
        gen = s.generator(name)
    except KeyError:
        raise _Invalid(f"line {t.line}: system {t.args['system']} has no generator {name!r}") from None
    rec.inputs.update(system=t.args["system"], gen=name)
    rec.derive("spectral", gen.spectral)
    rec.derive("image", gen.image)
    if "expect" in t.args:
        want = r.op(t, "expect", s.block)
        rec.certify("image as expected", gen.image == want, "", gen.image - want)


def _t_discrepancy(r: _Runner, t: Task, rec: TaskRecord):
    """Compare given (printed) dressing data with the identity-satisfying ones."""
    pair, f, g = _dressing_args(r, t, rec)
    dd = _dressing(pair, f, g, rec)
    if dd is None:
        return
    gop = DiffOperator.scalar(r.reg, "x", dd.g)
    Lf = dd.L_f
    if "K" in t.args:
        K = r.op(t, "K", "x")
        _echo(rec, "given K", K)
        rec.derive("derived K", dd.K)
        holds = op_mul(gop ** (dd.m + 1), Lf) == op_mul(K, gop)
        if K == dd.K:
            rec.notes.append("given K equals the derived K")
        else:
            rec.notes.append(
                f"DISCREPANCY K: g^{dd.m + 1} o L_f = K o g {'holds' if holds else 'fails'} for the given K; "
                f"given - derived = {K - dd.K}"
            )
    if "Q" in t.args:
        Q = r.op(t, "Q", "x")
        _echo(rec, "given Q", Q)
        rec.derive("derived Q", dd.Q)
        holds = op_mul(Lf ** (dd.n + 1), gop) == op_mul(Q, Lf)
        if Q == dd.Q:
            rec.notes.append("given Q equals the derived Q")
        else:
            rec.notes.append(
                f"DISCREPANCY Q: L_f^{dd.n + 1} o g = Q o L_f {'holds' if holds else 'fails'} for the given Q; "
                f"given - derived = {Q - dd.Q}"
            )
    if "fpower" in t.args:
        k = r.integer(t, "fpower", 0)
        rec.inputs["given f power"] = str(k)
        rec.derive("f power n+1", dd.n + 1)
        if k != dd.n + 1:
            rec.notes.append(
                f"DISCREPANCY f power: given generators use f^{k}, the construction requires f^{dd.n + 1} (n = ord L'_g = {dd.n})"
            )


def _t_show(r: _Runner, t: Task, rec: TaskRecord):
    if "system" in t.args:
        s = r.named(t, "system", r.s.systems, "system")
        _echo(rec, "system", t.args["system"])
        _system_lines(rec, s, t.args["system"])
        if s.localizers:
            rec.derive("localizers", ", ".join(map(str, s.localizers)))
        return
    if "pair" in t.args:
        p = r.named(t, "pair", r.s.pairs, "pair")
        _echo(rec, "pair", t.args["pair"])
        rec.derive("table", "\n" + str(p.table))
        rec.derive("wavefunction", p.wavefunction)
        return
    v = r.value(t, "expr")
    rec.inputs["expr"] = t.args["expr"]
    rec.derive("value", v)
    if isinstance(v, DiffOperator):
        rec.derive("order", v.order())


TASKS: dict[str, Callable[[_Runner, Task, TaskRecord], None]] = {
    "verify": _t_verify,
    "equal": _t_equal,
    "commute": _t_commute,
    "deduce": _t_deduce,
    "divide": _t_divide,
    "vanishing": _t_vanishing,
    "dressing": _t_dressing,
    "transform": _t_transform,
    "dual_transform": _t_dual_transform,
    "iterate": _t_iterate,
    "duality": _t_duality,
    "exchange": _t_exchange,
    "words": _t_words,
    "eigen": _t_eigen,
    "dimension": _t_dimension,
    "image": _t_image,
    "discrepancy": _t_discrepancy,
    "show": _t_show,
}


def run_session(
    session: Session,
    seed: int = 0,
    max_order: int | None = None,
    max_terms: int | None = None,
    timing: bool = True,
) -> Report:
    """Run every task in declaration order; failures are recorded, not raised.

    Limits not given here come from the session's ``[limits]`` section, then
    from DEFAULT_MAX_ORDER and DEFAULT_MAX_TERMS.
    """
    if max_order is None:
        max_order = session.limits.get("max_order", DEFAULT_MAX_ORDER)
    if max_terms is None:
        max_terms = session.limits.get("max_terms", DEFAULT_MAX_TERMS)
    runner = _Runner(session, seed)
    report = Report(session.name, seed)
    for i, task in enumerate(session.tasks, 1):
        rec = TaskRecord(i, task.kind)
        start = time.perf_counter()
        try:
            with resource_limits(max_order, max_terms):
                TASKS[task.kind](runner, task, rec)
        except ResourceLimitExceeded as exc:
            rec.error = {"type": "resource", "message": str(exc)}
        except (_Invalid, ParseError, NotExpressible, UnsupportedDivisor, PairValidationError, KernelError) as exc:
            rec.error = {"type": "invalid", "message": str(exc)}
        except (ValueError, ZeroDivisionError, KeyError) as exc:
            rec.error = {"type": "invalid", "message": f"{type(exc).__name__}: {exc}"}
        if timing:
            rec.millis = round((time.perf_counter() - start) * 1000)
        report.records.append(rec)
    return report
