"""Command-line front end: ``futurestep explore|check|prove|replay|futures``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .assertions import AssertionEvalError, eval_assertion, parse_assertion
from .events import DomainError, dump_futures, initial_futures, load_futures, value_closure
from .executor import (
    BudgetExceeded,
    ExploreResult,
    Explorer,
    Options,
    TraceError,
    explore,
    outcome_of,
    parse_trace,
    replay_trace,
)
from .futures import FutureError
from .lang import ParseError, Program, parse_program, unroll
from .proofcheck import OutlineError, check_og, load_outline

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_BUDGET, EXIT_OUTLINE = 0, 1, 2, 3, 4


class UsageError(ValueError):
    pass


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def parse_domain(specs: Sequence[str] | None) -> dict[str, list[int]] | None:
    """``x=0..3`` or ``x=0,1,99`` (repeatable)."""
    if not specs:
        return None
    out: dict[str, list[int]] = {}
    for spec in specs:
        var, sep, rng = spec.partition("=")
        if not sep or not var:
            raise UsageError(f"--domain expects var=lo..hi or var=a,b,c, got {spec!r}")
        try:
            if ".." in rng:
                lo, hi = rng.split("..")
                vals = list(range(int(lo), int(hi) + 1))
            else:
                vals = [int(v) for v in rng.split(",")]
        except ValueError:
            raise UsageError(f"bad --domain value {spec!r}") from None
        out.setdefault(var.strip(), []).extend(vals)
    return {k: sorted(set(v)) for k, v in out.items()}


def _options(args) -> Options:
    return Options(
        unroll=args.unroll,
        domain=parse_domain(args.domain),
        budget=args.budget,
        jobs=args.jobs,
        collapse=getattr(args, "collapse", False),
    )


def _load_program(path: str) -> Program:
    return parse_program(Path(path).read_text())


def _explorer(args, program: Program) -> Explorer:
    opts = _options(args)
    futures = None
    if args.deps == "external" and not args.futures:
        raise UsageError("--deps external needs --futures FILE")
    if args.futures:
        p = unroll(program, opts.unroll) if program.has_loops() else program
        futures = load_futures(args.futures, p)
    return Explorer(program, futures, options=opts)


def _warnings(program: Program, ex: Explorer, res: ExploreResult | None = None) -> list[str]:
    out = []
    if program.has_loops():
        out.append(f"loops unrolled to depth {ex.options.unroll}; later iterations are dropped")
    if res is not None and ex.domain:
        seen = set()
        for g in res.final_graphs:
            for a in g.acts:
                act = a.action
                if act.is_write and act.var in ex.domain and act.wval not in ex.domain[act.var]:
                    seen.add((act.var, act.wval))
        for x, v in sorted(seen):
            out.append(f"value {v} written to {x} lies outside its domain; reads of it are not explored")
    return out


def _outcome_docs(res: ExploreResult) -> list[dict]:
    docs = []
    for o in sorted(res.outcomes):
        d = o.as_dict()
        d["witness"] = [str(s) for s in res.outcomes[o]]
        docs.append(d)
    return docs


def cmd_explore(args) -> int:
    program = _load_program(args.program)
    if args.trace:
        return _replay(args, program, args.trace)
    ex = _explorer(args, program)
    res = explore(program, explorer=ex)
    warnings = _warnings(program, ex, res)
    if args.format == "json":
        doc = {
            "outcomes": _outcome_docs(res),
            "count": len(res.outcomes),
            "states": res.states,
            "terminals": res.terminals,
            "stuck": len(res.stuck),
            "warnings": warnings,
        }
        sys.stdout.write(canonical_json(doc))
    else:
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        print(f"{len(res.outcomes)} outcome(s), {res.states} states, {res.terminals} terminal, {len(res.stuck)} stuck")
        for o in sorted(res.outcomes):
            print(f"  {o}")
            if args.witness:
                for s in res.outcomes[o]:
                    print(f"      {s}")
    return EXIT_OK


def cmd_check(args) -> int:
    program = _load_program(args.program)
    if args.trace:
        return _replay(args, program, args.trace)
    cond = parse_assertion(args.condition)
    ex = _explorer(args, program)
    res = explore(program, explorer=ex)
    sat = [c for c in res.final_configs if eval_assertion(cond, c, ex)]
    verdict = bool(sat) if args.mode == "reachable" else not sat
    witness = []
    if sat:
        o = outcome_of(sat[0])
        witness = [str(s) for s in res.outcomes[o]]
    if args.format == "json":
        doc = {
            "mode": args.mode,
            "condition": str(cond),
            "verdict": "pass" if verdict else "fail",
            "satisfying_terminals": len(sat),
            "terminals": res.terminals,
            "witness": witness,
            "warnings": _warnings(program, ex, res),
        }
        sys.stdout.write(canonical_json(doc))
    else:
        for w in _warnings(program, ex, res):
            print(f"warning: {w}", file=sys.stderr)
        status = "PASS" if verdict else "FAIL"
        print(f"{status}: {args.mode} {cond} ({len(sat)} of {res.terminals} terminal configurations satisfy it)")
        if witness:
            print("  witness:")
            for s in witness:
                print(f"    {s}")
    return EXIT_OK if verdict else EXIT_FAIL


def _replay(args, program: Program, trace_path: str) -> int:
    trace = parse_trace(Path(trace_path).read_text())
    ex = _explorer(args, program)
    v = replay_trace(program, trace, explorer=ex, lines_only=getattr(args, "lines_only", False))
    if args.format == "json":
        sys.stdout.write(
            canonical_json({"verdict": str(v), "reason": v.reason, "witness": [str(s) for s in v.witness]})
        )
    else:
        print(str(v) + (f": {v.reason}" if v.reason else ""))
    return EXIT_OK if v else EXIT_FAIL


def cmd_replay(args) -> int:
    return _replay(args, _load_program(args.program), args.trace_file)


def cmd_prove(args) -> int:
    program = _load_program(args.program) if args.program else None
    outline = load_outline(args.outline, program)
    opts = _options(args)
    if outline.domain is None and opts.domain is not None:
        outline.domain = opts.domain
    if args.unroll:
        outline.unroll = args.unroll
    report = check_og(outline, Options(outline.unroll, outline.domain, opts.budget))
    if args.format == "json":
        sys.stdout.write(canonical_json(report.as_dict()))
    else:
        print(report.summary())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_futures(args) -> int:
    program = _load_program(args.program)
    opts = _options(args)
    p = unroll(program, opts.unroll) if program.has_loops() else program
    pf = initial_futures(p, value_closure(p, opts.domain))
    sys.stdout.write(canonical_json(dump_futures(pf.future_set())))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--unroll", type=int, default=0, metavar="N", help="loop unrolling depth")
    common.add_argument("--domain", action="append", metavar="VAR=LO..HI", help="value domain of a variable")
    common.add_argument("--futures", metavar="FILE", help="use futures from a JSON file instead of computing them")
    common.add_argument(
        "--deps",
        choices=("syntactic", "external"),
        default="syntactic",
        help="compute dependencies from the program text, or take them from --futures",
    )
    common.add_argument("--budget", type=int, default=1_000_000, metavar="N", help="maximum configurations")
    common.add_argument("--format", choices=("table", "json"), default="table")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes")
    common.add_argument("--collapse", action="store_true", help="explore with label futures")

    ap = argparse.ArgumentParser(prog="futurestep", description="Future-based weak-memory exploration and proof checking")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", parents=[common], help="list every outcome")
    p.add_argument("program")
    p.add_argument("--trace", metavar="FILE", help="replay a trace instead")
    p.add_argument("--witness", action="store_true", help="print a witness trace per outcome")
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("check", parents=[common], help="judge a final-state condition")
    p.add_argument("program")
    p.add_argument("mode", choices=("reachable", "forbidden"))
    p.add_argument("condition")
    p.add_argument("--trace", metavar="FILE", help="replay a trace instead")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("prove", parents=[common], help="check an Owicki-Gries proof outline")
    p.add_argument("outline")
    p.add_argument("--program", help="program file (overrides the outline's)")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("replay", parents=[common], help="judge a trace as ALLOWED or DISALLOWED")
    p.add_argument("program")
    p.add_argument("trace_file")
    p.add_argument("--lines-only", action="store_true", help="match thread, kind and line only")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("futures", parents=[common], help="dump the computed initial futures")
    p.add_argument("program")
    p.set_defaults(func=cmd_futures)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OutlineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTLINE
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ParseError, TraceError, FutureError, DomainError, UsageError, AssertionEvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
