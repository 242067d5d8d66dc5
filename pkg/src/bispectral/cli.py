"""Command line: run session files and built-in examples, or check one intertwining."""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

from .builtins import NAMES, UnknownExample, example_text
from .darboux import verify_intertwining
from .field import VariableRegistry
from .operators import DiffOperator, ResourceLimitExceeded, resource_limits
from .parser import ParseError, parse_expression
from .session import EXIT_CERTIFICATE, EXIT_INVALID, EXIT_OK, EXIT_RESOURCE, parse_session, run_session


def _run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-order", type=int, default=None, help="default: session [limits], else 16")
    p.add_argument("--max-terms", type=int, default=None, help="default: session [limits], else 200000")
    p.add_argument("--no-timing", action="store_true", help="omit per-task milliseconds (byte-stable reports)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bispectral", description="Exact bispectral Darboux transformation workbench.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a session file")
    run.add_argument("file")
    _run_options(run)

    ex = sub.add_parser("examples", help="built-in sessions")
    exsub = ex.add_subparsers(dest="action", required=True)
    exsub.add_parser("list", help="list built-in sessions")
    show = exsub.add_parser("show", help="print a built-in session")
    show.add_argument("name")
    show.add_argument("--n", type=int, default=None, help="dimension for weyl-n (default 2)")
    exrun = exsub.add_parser("run", help="run a built-in session")
    exrun.add_argument("name")
    exrun.add_argument("--n", type=int, default=None, help="dimension for weyl-n (default 2)")
    _run_options(exrun)

    ver = sub.add_parser("verify", help="check K o L = Lt o K")
    ver.add_argument("--K", required=True)
    ver.add_argument("--L", required=True)
    ver.add_argument("--Lt", required=True)
    ver.add_argument("--x", default=None, help="comma-separated x variables (default: inferred)")
    ver.add_argument("--z", default="", help="comma-separated z variables")
    ver.add_argument("--params", default="", help="comma-separated parameters")
    return parser


def _split(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _execute(text: str, source: str, args) -> int:
    try:
        session = parse_session(text, source)
    except ParseError as exc:
        print(f"{source}:{exc.line}:{exc.column}: {exc.message}", file=sys.stderr)
        return EXIT_INVALID
    report = run_session(session, args.seed, args.max_order, args.max_terms, timing=not args.no_timing)
    print(report.to_json() if args.format == "json" else report.to_text())
    for r in report.records:
        if r.error:
            print(f"{source}: task {r.task} ({r.kind}): {r.error['message']}", file=sys.stderr)
    return report.exit_code


def _verify(args) -> int:
    texts = (args.K, args.L, args.Lt)
    params = _split(args.params)
    z = _split(args.z)
    if args.x is None:
        seen: list[str] = []
        for t in texts:
            for ident in re.findall(r"[A-Za-z_][A-Za-z0-9_']*", t):
                if ident != "D" and ident not in params and ident not in z and ident not in seen:
                    seen.append(ident)
        x = tuple(seen)
    else:
        x = _split(args.x)
    try:
        reg = VariableRegistry(x, z, params)
        values = []
        for label, t in zip(("K", "L", "Lt"), texts):
            try:
                values.append(parse_expression(t, reg))
            except ParseError as exc:
                print(f"--{label}: column {exc.column}: {exc.message}", file=sys.stderr)
                return EXIT_INVALID
        blocks = {v.block for v in values if isinstance(v, DiffOperator)}
        if len(blocks) > 1:
            print("K, L and Lt act on different variable blocks", file=sys.stderr)
            return EXIT_INVALID
        block = blocks.pop() if blocks else "x"
        K, L, Lt = (v if isinstance(v, DiffOperator) else DiffOperator.scalar(reg, block, v) for v in values)
        with resource_limits(16, 200_000):
            ok, defect = verify_intertwining(K, L, Lt)
    except ResourceLimitExceeded as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    print(f"K  = {K}\nL  = {L}\nLt = {Lt}")
    if ok:
        print("intertwining: PASS")
        return EXIT_OK
    print(f"intertwining: FAIL\ndefect K o L - Lt o K = {defect}")
    return EXIT_CERTIFICATE


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        try:
            text = Path(args.file).read_text(encoding="utf-8")
        except OSError as exc:
            print(f"cannot read {args.file}: {exc.strerror}", file=sys.stderr)
            return EXIT_INVALID
        return _execute(text, args.file, args)
    if args.command == "verify":
        return _verify(args)
    if args.action == "list":
        for name in NAMES:
            print(name)
        return EXIT_OK
    try:
        text = example_text(args.name, args.n)
    except UnknownExample as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    if args.action == "show":
        print(text, end="")
        return EXIT_OK
    return _execute(text, args.name, args)
