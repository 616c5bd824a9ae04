"""Command-line entry point: prove, check, bench and oracle."""

from __future__ import annotations

import argparse
import json
import sys
import time
from importlib import resources
from pathlib import Path

from . import kernel
from .formula import FormulaError, parse, read_suite, show
from .relsolve import Budget
from .search import Proved, SearchOptions, prove
from .semantics import MAX_SIZE, Flags, countermodel

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _semantics(p: argparse.ArgumentParser):
    g = p.add_argument_group("semantic variants")
    g.add_argument("--pd", action="store_true", help="partial-deterministic composition (rule P)")
    g.add_argument("--td", action="store_true", help="total deterministic composition (rules P and T)")
    g.add_argument("--indivisible-unit", action="store_true", help="indivisible unit (rule IU)")
    g.add_argument("--cancellative", action="store_true", help="cancellative composition (rules C and P)")


def _budgets(p: argparse.ArgumentParser):
    g = p.add_argument_group("budgets")
    g.add_argument("--depth", type=int, default=3, metavar="N",
                   help="uses of each *R / -*L occurrence per branch (default 3)")
    g.add_argument("--a-budget", type=int, default=4, metavar="N",
                   help="associativity steps per entailment query (default 4)")
    g.add_argument("--timeout", type=int, default=10_000, metavar="MS",
                   help="wall-clock limit per formula in milliseconds (default 10000)")


def extras_of(args) -> frozenset:
    out = set()
    if args.pd:
        out.add("P")
    if args.td:
        out |= {"P", "T"}
    if args.indivisible_unit:
        out.add("IU")
    if args.cancellative:
        out |= {"C", "P"}
    return frozenset(out)


def _options(args, emit: bool) -> SearchOptions:
    if args.depth < 1 or args.a_budget < 0 or args.timeout < 0:
        raise ValueError("--depth must be at least 1; budgets must be non-negative")
    return SearchOptions(multiplicity=args.depth, r_budget=Budget(max_A=args.a_budget),
                         extras=extras_of(args), timeout=args.timeout, emit_proof=emit)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bbiprove", description="Labelled sequent prover and proof checker for Boolean BI.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pr = sub.add_parser("prove", help="search for a proof of a formula")
    pr.add_argument("formula")
    _semantics(pr)
    _budgets(pr)
    pr.add_argument("--emit-proof", metavar="PATH", help="write the checked proof as JSON")
    pr.add_argument("--show-proof", action="store_true", help="print the proof tree")

    ch = sub.add_parser("check", help="validate a proof file")
    ch.add_argument("proof", help="JSON proof file, or - for standard input")
    ch.add_argument("--allow-cut", action="store_true")
    _semantics(ch)

    be = sub.add_parser("bench", help="run every formula of a suite file")
    be.add_argument("suite", nargs="?", help="suite file (default: the bundled benchmark table)")
    _semantics(be)
    _budgets(be)

    orc = sub.add_parser("oracle", help="look for a finite countermodel")
    orc.add_argument("formula")
    orc.add_argument("--max-model-size", type=int, default=3, metavar="N",
                     help=f"largest model size tried, at most {MAX_SIZE} (default 3)")
    _semantics(orc)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (FormulaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_prove(args) -> int:
    f = parse(args.formula)
    out = prove(f, _options(args, emit=True))
    if isinstance(out, Proved):
        print(f"PROVED  {show(f)}")
        print(f"  {out.stats}")
        if args.emit_proof:
            doc = kernel.to_json(out.proof)
            doc["extras"] = sorted(extras_of(args))
            Path(args.emit_proof).write_text(json.dumps(doc, ensure_ascii=False) + "\n", encoding="utf-8")
            print(f"  proof written to {args.emit_proof}")
        if args.show_proof:
            print(kernel.render(out.proof))
        return EXIT_OK
    print(f"UNPROVED  {show(f)}  ({out.reason})")
    print(f"  {out.stats}")
    return EXIT_FAIL


def cmd_check(args) -> int:
    text = sys.stdin.read() if args.proof == "-" else Path(args.proof).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
        d = kernel.from_json(doc)
        declared = set(doc.get("extras", []))
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
        print(f"error: malformed proof file: {exc}", file=sys.stderr)
        return EXIT_ERROR
    # a proof file may declare the extra structural rules it was produced with
    extras = extras_of(args) | (declared & kernel.EXTRAS)
    if extras:
        print(f"extra rules enabled: {', '.join(sorted(extras))}")
    report = kernel.check(d, allow_cut=args.allow_cut, extras=extras)
    print(("ACCEPTED  " if report.accepted else "REJECTED  ") + str(report))
    if report.accepted:
        print(f"  end sequent: {d.conclusion}")
    return EXIT_OK if report.accepted else EXIT_FAIL


def cmd_bench(args) -> int:
    if args.suite:
        text = Path(args.suite).read_text(encoding="utf-8")
    else:
        text = resources.files("bbiprover").joinpath("table1.txt").read_text(encoding="utf-8")
    formulas = read_suite(text)
    opts = _options(args, emit=False)
    width = max((len(s) for s in formulas), default=7)
    print(f"{'#':>3}  {'Formula':<{width}}  {'Result':<9}  {'Time (s)':>8}")
    proved = 0
    for i, text in enumerate(formulas, 1):
        f = parse(text)
        start = time.monotonic()
        out = prove(f, opts)
        took = time.monotonic() - start
        ok = isinstance(out, Proved)
        proved += ok
        print(f"{i:>3}  {text:<{width}}  {'PROVED' if ok else 'UNPROVED':<9}  {took:>8.3f}")
    print(f"{proved}/{len(formulas)} proved")
    return EXIT_OK if proved == len(formulas) else EXIT_FAIL


def cmd_oracle(args) -> int:
    f = parse(args.formula)
    extras = extras_of(args)
    flags = Flags.for_rules(extras)
    cm = countermodel(f, args.max_model_size, flags)
    if cm is None:
        print(f"NO COUNTERMODEL up to size {args.max_model_size}  {show(f)}")
        return EXIT_OK
    print(f"COUNTERMODEL  {show(f)}")
    print(cm)
    return EXIT_FAIL


_COMMANDS = {"prove": cmd_prove, "check": cmd_check, "bench": cmd_bench, "oracle": cmd_oracle}


if __name__ == "__main__":
    sys.exit(main())
