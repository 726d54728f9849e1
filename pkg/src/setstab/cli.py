"""Command-line front end.

    setstab check FILE [--format text|jsonlines] [--nmax N] [--enum-ceiling N] [--timings]
    setstab --fixtures

Exit status: 0 when every query with an ``expect`` field matched (and every
fixture reproduced), 1 on a mismatch, 2 when the document is rejected.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import DEFAULT_CEILING
from .document import DocumentError, Settings, emit_report, parse_document, report_ok, run_queries, to_jsonable
from .modelgen import run_fixtures


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="setstab", description="Check set-theoretic stability properties of finite systems.")
    p.add_argument("--fixtures", action="store_true", help="run the built-in example suite and exit")
    p.add_argument("--format", choices=("text", "jsonlines"), default="text", help="report format (default: text)")
    sub = p.add_subparsers(dest="command")
    check = sub.add_parser("check", help="run the queries of a document")
    check.add_argument("file", help="JSON document, or - for standard input")
    check.add_argument("--format", choices=("text", "jsonlines"), default=None, dest="check_format")
    check.add_argument("--nmax", type=int, default=None, help="default iteration bound for small-gain queries")
    check.add_argument("--enum-ceiling", type=int, default=DEFAULT_CEILING, help="largest number of subsets to enumerate")
    check.add_argument("--timings", action="store_true", help="add wall_time to every record")
    return p


def fixture_records() -> list[dict]:
    records = []
    for suite, fx in run_fixtures():
        v = fx.verdict
        records.append(
            {
                "id": fx.name,
                "type": "fixture",
                "suite": suite,
                "holds": v.holds,
                "witness": to_jsonable(v.witness),
                "notes": list(v.notes),
                "expect": "holds" if fx.expect else "fails",
                "matched": fx.ok,
            }
        )
    return records


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.fixtures:
        records = fixture_records()
        sys.stdout.write(emit_report(records, args.format))
        return 0 if report_ok(records) else 1
    if args.command != "check":
        build_parser().print_usage(sys.stderr)
        return 2
    fmt = args.check_format or args.format
    if args.nmax is not None and args.nmax < 1:
        print("setstab: --nmax must be at least 1", file=sys.stderr)
        return 2
    try:
        text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"setstab: {exc}", file=sys.stderr)
        return 2
    try:
        doc = parse_document(text)
    except DocumentError as exc:
        print(f"setstab: {exc}", file=sys.stderr)
        return 2
    records = run_queries(doc, Settings(ceiling=args.enum_ceiling, n_max=args.nmax), timings=args.timings)
    sys.stdout.write(emit_report(records, fmt))
    for r in records:
        if "error" in r:
            print(f"setstab: query {r['id']}: {r['error']}", file=sys.stderr)
    return 0 if report_ok(records) else 1


if __name__ == "__main__":
    sys.exit(main())
