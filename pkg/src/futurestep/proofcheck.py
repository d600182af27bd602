"""Hoare triples and Owicki-Gries obligations, checked by enumeration.

Every check quantifies over a finite universe of configurations: everything
reachable from the initial memories whose shared variables start at any value
of their domain (registers keep their declared initial values).  A passing
report therefore holds for that universe only; reports say so
("reachability-restricted").

A future predicate names sub-futures of a thread by the set of lines they
still contain, optionally pinning read values (``"3@1"``) and order
(``[["1", "2"]]``).  The assertion attached to a configuration's current
thread future is the conjunction of all names whose description matches it.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .assertions import Assertion, context_for, conj, evaluate, parse_assertion
from .executor import Explorer, Options, StateSpace, TraceStep, search
from .futures import Future, is_up_closed_in
from .lang import ParseError, Program, parse_program

SCOPE = "reachability-restricted"


class OutlineError(ValueError):
    """Malformed proof outline."""


# ---------------------------------------------------------------------------
# Future predicates


@dataclass(frozen=True)
class SubFutureSpec:
    """Lines a thread future still holds, with optional values and order."""

    lines: frozenset[str]
    values: Mapping[str, int] = field(default_factory=dict)
    order: tuple[tuple[str, str], ...] = ()

    @classmethod
    def parse(cls, labels: Iterable[str], order: Iterable[Sequence[str]] = ()) -> "SubFutureSpec":
        lines, values = set(), {}
        for item in labels:
            item = str(item)
            line, _, val = item.partition("@")
            if line in lines:
                raise OutlineError(f"line {line!r} listed twice")
            lines.add(line)
            if val:
                try:
                    values[line] = int(val)
                except ValueError:
                    raise OutlineError(f"bad read value in {item!r}") from None
        pairs = []
        for pair in order:
            if len(pair) != 2:
                raise OutlineError(f"order entries are pairs, got {pair!r}")
            a, b = (str(p).partition("@")[0] for p in pair)
            if a not in lines or b not in lines:
                raise OutlineError(f"order pair {pair!r} mentions a line outside the sub-future")
            pairs.append((a, b))
        return cls(frozenset(lines), values, tuple(pairs))

    def matches(self, ex: Explorer, fut: frozenset[Future]) -> bool:
        items = [g for f in fut for g in f.events]
        if {ex.item_line[g] for g in items} != self.lines:
            return False
        for g in items:
            want = self.values.get(ex.item_line[g])
            if want is not None and _rval(ex, g) != want:
                return False
        for a, b in self.order:
            for f in fut:
                for ga in f.events:
                    if ex.item_line[ga] != a:
                        continue
                    for gb in f.events:
                        if ex.item_line[gb] == b and (ga, gb) not in f.order:
                            return False
        return True

    def is_subfuture_of(self, ex: Explorer, initial: frozenset[Future]) -> bool:
        """Some initial thread future has an up-closed part fitting this description."""
        for f in initial:
            keep = {
                g
                for g in f.events
                if ex.item_line[g] in self.lines
                and (ex.item_line[g] not in self.values or _rval(ex, g) == self.values[ex.item_line[g]])
            }
            sub = f.restrict(keep)
            if is_up_closed_in(sub, f) and self.matches(ex, frozenset((sub,))):
                return True
        return False

    def __str__(self) -> str:
        items = sorted(f"{l}@{self.values[l]}" if l in self.values else l for l in self.lines)
        return "{" + ", ".join(items) + "}"


def _rval(ex: Explorer, g) -> int | None:
    if ex.collapsed:
        return g.rval
    return ex.future_set.labels[g].rval


@dataclass
class FuturePredicate:
    tid: int
    named: dict[str, tuple[SubFutureSpec, Assertion]]
    default: Assertion | None = None

    def resolve(self, ex: Explorer, fut: frozenset[Future]) -> tuple[tuple[str, ...], Assertion | None]:
        names = tuple(n for n, (spec, _) in sorted(self.named.items()) if spec.matches(ex, fut))
        if names:
            return names, conj(self.named[n][1] for n in names)
        if self.default is not None:
            return ("*",), self.default
        return (), None

    @classmethod
    def constant(cls, tid: int, a: Assertion) -> "FuturePredicate":
        return cls(tid, {}, a)


@dataclass
class ProofOutline:
    program: Program
    pre: Assertion
    post: Assertion
    threads: dict[int, FuturePredicate]
    domain: Mapping[str, Iterable[int]] | None = None
    initial_values: Mapping[str, Sequence[int]] | None = None
    unroll: int = 0


def _parse_values(v) -> list[int]:
    if isinstance(v, str):
        lo, sep, hi = v.partition("..")
        if not sep:
            raise OutlineError(f"value range {v!r} should look like lo..hi")
        return list(range(int(lo), int(hi) + 1))
    if isinstance(v, list) and all(isinstance(i, int) for i in v):
        return v
    raise OutlineError(f"bad value list {v!r}")


def load_outline(source: str | PathLike | Mapping, program: Program | None = None) -> ProofOutline:
    """Read a proof outline (JSON file or already-decoded mapping)."""
    base = Path(".")
    if isinstance(source, Mapping):
        doc = source
    else:
        path = Path(source)
        base = path.parent
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise OutlineError(f"{path}: not JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise OutlineError("outline must be a JSON object")
    try:
        if program is None:
            if "program" not in doc:
                raise OutlineError("outline names no program and none was given")
            program = parse_program((base / doc["program"]).read_text())
        for key in ("pre", "post"):
            if key not in doc:
                raise OutlineError(f"outline has no {key!r} assertion")
        pre = parse_assertion(doc["pre"])
        post = parse_assertion(doc["post"])
        threads: dict[int, FuturePredicate] = {}
        for key, td in doc.get("threads", {}).items():
            t = int(key)
            if t not in program.threads:
                raise OutlineError(f"outline mentions thread {t}, which the program lacks")
            subs = td.get("subfutures", {})
            asserts = td.get("assertions", {})
            extra = set(asserts) - set(subs)
            if extra:
                raise OutlineError(f"thread {t}: assertions for undeclared sub-futures {sorted(extra)}")
            named = {}
            for name, sd in subs.items():
                if name not in asserts:
                    raise OutlineError(f"thread {t}: sub-future {name!r} has no assertion")
                spec = SubFutureSpec.parse(sd.get("labels", []), sd.get("order", []))
                named[name] = (spec, parse_assertion(asserts[name]))
            default = parse_assertion(td["default"]) if "default" in td else None
            threads[t] = FuturePredicate(t, named, default)
        missing = set(program.threads) - set(threads)
        if missing:
            raise OutlineError(f"no future predicate for thread(s) {sorted(missing)}")
        domain = {x: _parse_values(v) for x, v in doc.get("domain", {}).items()} or None
        inits = {x: _parse_values(v) for x, v in doc.get("initial_values", {}).items()} or None
        return ProofOutline(program, pre, post, threads, domain, inits, int(doc.get("unroll", 0)))
    except ParseError as exc:
        raise OutlineError(f"assertion syntax: {exc}") from None
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, OutlineError):
            raise
        raise OutlineError(f"malformed outline: {exc}") from None


# ---------------------------------------------------------------------------
# The configuration universe


@dataclass
class Universe:
    explorer: Explorer
    space: StateSpace
    declared_root: tuple
    root_init: dict[tuple, dict[str, int]]

    def counterexample(self, key: tuple, extra: TraceStep | None = None) -> dict:
        tr = self.space.trace_to(key)
        if extra is not None:
            tr = tr + [extra]
        root = key
        while self.space.parent[root] is not None:
            root = self.space.parent[root][0]
        return {"initial": dict(sorted(self.root_init[root].items())), "trace": [str(s) for s in tr]}


def build_universe(
    program: Program,
    domain: Mapping[str, Iterable[int]] | None = None,
    initial_values: Mapping[str, Sequence[int]] | None = None,
    options: Options | None = None,
    explorer: Explorer | None = None,
) -> Universe:
    opts = options or Options()
    if domain is not None:
        opts = Options(opts.unroll, domain, opts.budget, opts.jobs, opts.collapse)
    ex = explorer or Explorer(program, options=opts)
    variables = ex.program.variables()
    choices = []
    for x in variables:
        if initial_values and x in initial_values:
            choices.append(sorted(set(initial_values[x])))
        else:
            choices.append(sorted(ex.domain.get(x, {0})))
    declared = ex.initial()
    roots = [declared]
    root_init = {declared.key(): {x: ex.program.init.get(x, 0) for x in variables}}
    for combo in itertools.product(*choices):
        init = dict(zip(variables, combo))
        c = ex.initial(init)
        if c.key() not in root_init:
            roots.append(c)
            root_init[c.key()] = init
    space = search(ex, roots, keep_edges=True)
    return Universe(ex, space, declared.key(), root_init)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class Obligation:
    kind: str  # init | pre | post | local | global | coverage | subfuture
    key: tuple
    passed: bool = True
    checked: int = 0  # instances whose premise held
    counterexample: dict | None = None
    note: str = ""

    @property
    def vacuous(self) -> bool:
        return self.passed and self.checked == 0 and self.kind in ("local", "global")

    def as_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "key": [list(k) if isinstance(k, tuple) else k for k in self.key],
            "passed": self.passed,
            "checked": self.checked,
            "vacuous": self.vacuous,
        }
        if self.note:
            d["note"] = self.note
        if self.counterexample is not None:
            d["counterexample"] = self.counterexample
        return d


@dataclass
class ObligationReport:
    obligations: list[Obligation]
    states: int
    scope: str = SCOPE

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.obligations)

    @property
    def failures(self) -> list[Obligation]:
        return [o for o in self.obligations if not o.passed]

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "scope": self.scope,
            "states": self.states,
            "obligations": len(self.obligations),
            "failed": len(self.failures),
            "vacuous": sum(o.vacuous for o in self.obligations),
            "details": [o.as_dict() for o in self.obligations],
        }

    def summary(self) -> str:
        lines = [
            f"{'PASS' if self.passed else 'FAIL'} ({self.scope}): {len(self.obligations)} obligations, "
            f"{len(self.failures)} failed, {sum(o.vacuous for o in self.obligations)} vacuous, {self.states} states"
        ]
        for o in self.failures:
            lines.append(f"  failed {o.kind} {o.key}{': ' + o.note if o.note else ''}")
            if o.counterexample:
                lines.append(f"    initial {o.counterexample['initial']}")
                for s in o.counterexample["trace"]:
                    lines.append(f"    {s}")
        return "\n".join(lines)


class _Evaluator:
    """Caches assertion truth and thread-future resolution per configuration."""

    def __init__(self, u: Universe):
        self.u = u
        self.ex = u.explorer
        self._ctx: dict = {}
        self._res: dict = {}
        self._truth: dict = {}

    def ctx(self, key):
        c = self._ctx.get(key)
        if c is None:
            c = self._ctx[key] = context_for(self.u.space.states[key], self.ex)
        return c

    def holds(self, a: Assertion, key) -> bool:
        k = (id(a), key)
        v = self._truth.get(k)
        if v is None:
            v = self._truth[k] = evaluate(a, self.ctx(key))
        return v

    def resolve(self, pred: FuturePredicate, key):
        k = (pred.tid, id(pred), key)
        r = self._res.get(k)
        if r is None:
            fut = self.ex.thread_futures(self.u.space.states[key], pred.tid)
            r = self._res[k] = pred.resolve(self.ex, fut)
        return r


# ---------------------------------------------------------------------------
# Checks


def check_hoare(
    program: Program,
    pre: Assertion | str,
    post: Assertion | str,
    options: Options | None = None,
    universe: Universe | None = None,
) -> Obligation:
    """``Init ⇒ X`` and every terminal reachable from an X-state satisfies Y."""
    pre = parse_assertion(pre) if isinstance(pre, str) else pre
    post = parse_assertion(post) if isinstance(post, str) else post
    u = universe or build_universe(program, options=options)
    ev = _Evaluator(u)
    ob = Obligation("hoare", ("pre", str(pre), "post", str(post)))
    if not ev.holds(pre, u.declared_root):
        ob.passed = False
        ob.note = "the initial configuration does not satisfy the precondition"
        ob.counterexample = u.counterexample(u.declared_root)
        return ob
    good_roots = {r for r in u.space.roots if ev.holds(pre, r)}
    for k in u.space.terminals:
        root = k
        while u.space.parent[root] is not None:
            root = u.space.parent[root][0]
        if root not in good_roots:
            continue
        ob.checked += 1
        if not ev.holds(post, k):
            ob.passed = False
            ob.counterexample = u.counterexample(k)
            return ob
    return ob


def check_step_triple(
    u: Universe,
    tid: int,
    pre: FuturePredicate,
    spec: SubFutureSpec | None,
    post: FuturePredicate,
    extra: Sequence[FuturePredicate] = (),
    ev: _Evaluator | None = None,
) -> dict[tuple, Obligation]:
    """``{pre ∧ extra}_G Q {post}`` for steps of thread ``tid``.

    ``G`` ranges over the thread futures matched by ``spec`` (all reachable
    ones when ``spec`` is None).  ``pre``/``post`` may belong to a different
    thread than ``tid``; then this is an interference check.  Returns one
    obligation per (pre sub-future, step line).
    """
    ev = ev or _Evaluator(u)
    ex = u.explorer
    out: dict[tuple, Obligation] = {}
    for k, st, dk in u.space.edges:
        if st.tid != tid:
            continue
        c = u.space.states[k]
        if spec is not None and not spec.matches(ex, ex.thread_futures(c, tid)):
            continue
        names, a = ev.resolve(pre, k)
        if a is None:
            continue
        key = (pre.tid, names, tid, st.action.line)
        ob = out.setdefault(key, Obligation("step", key))
        if not ev.holds(a, k):
            continue
        ok = True
        for other in extra:
            _, b = ev.resolve(other, k)
            if b is None or not ev.holds(b, k):
                ok = False
                break
        if not ok:
            continue
        ob.checked += 1
        _, a2 = ev.resolve(post, dk)
        if a2 is None:
            continue  # reported by the coverage check
        if not ev.holds(a2, dk) and ob.passed:
            ob.passed = False
            ob.counterexample = u.counterexample(k, st)
    return out


def check_future_stability(pred: FuturePredicate, u: Universe, ev: _Evaluator | None = None) -> list[Obligation]:
    """Local correctness of one thread's predicate, per reachable sub-future and line."""
    obs = check_step_triple(u, pred.tid, pred, None, pred, ev=ev)
    result = []
    for (t, names, _, line), ob in sorted(obs.items(), key=lambda kv: repr(kv[0])):
        ob.kind = "local"
        ob.key = (t, "+".join(names), line)
        result.append(ob)
    return result


def check_og(outline: ProofOutline, options: Options | None = None) -> ObligationReport:
    """All Owicki-Gries obligations of ``outline``."""
    u = build_universe(outline.program, outline.domain, outline.initial_values, options or Options(unroll=outline.unroll))
    ex = u.explorer
    ev = _Evaluator(u)
    obligations: list[Obligation] = []
    preds = outline.threads
    tids = ex.tids

    # named sub-futures must be sub-futures of the initial thread future
    for t in tids:
        init_f = ex.initial_futures[ex.comp_of[t]] if len(ex.comp_tids[ex.comp_of[t]]) == 1 else ex.thread_futures(ex.initial(), t)
        for name, (spec, _) in sorted(preds[t].named.items()):
            ok = spec.is_subfuture_of(ex, init_f)
            if not ok:
                obligations.append(
                    Obligation("subfuture", (t, name), False, note=f"{spec} is not a sub-future of thread {t}'s initial futures")
                )

    # (1) Init ⇒ X
    ob = Obligation("init", ("Init => pre",))
    ob.checked = 1
    if not ev.holds(outline.pre, u.declared_root):
        ob.passed = False
        ob.counterexample = u.counterexample(u.declared_root)
    obligations.append(ob)

    # (2) X ⇒ I_t(F|t) at initial configurations
    for t in tids:
        ob = Obligation("pre", (t,))
        for r in u.space.roots:
            if not ev.holds(outline.pre, r):
                continue
            names, a = ev.resolve(preds[t], r)
            ob.checked += 1
            if a is None or not ev.holds(a, r):
                ob.passed = False
                ob.counterexample = u.counterexample(r)
                ob.note = "no assertion for the initial future" if a is None else ""
                break
        obligations.append(ob)

    # (3) ∀t I_t(∅) ⇒ Y at terminal configurations
    ob = Obligation("post", ("I(empty) => post",))
    for k in u.space.terminals:
        premise = True
        for t in tids:
            _, a = ev.resolve(preds[t], k)
            if a is None or not ev.holds(a, k):
                premise = False
                break
        if not premise:
            continue
        ob.checked += 1
        if not ev.holds(outline.post, k):
            ob.passed = False
            ob.counterexample = u.counterexample(k)
            break
    obligations.append(ob)

    # coverage: every reachable thread future needs an assertion
    uncovered: dict[tuple, tuple] = {}
    for k, c in u.space.states.items():
        for t in tids:
            names, a = ev.resolve(preds[t], k)
            if a is None:
                lines = tuple(sorted(ex.remaining_lines(c, t)))
                uncovered.setdefault((t, lines), k)
    for (t, lines), k in sorted(uncovered.items()):
        obligations.append(
            Obligation(
                "coverage",
                (t, "{" + ", ".join(lines) + "}"),
                False,
                note="reachable thread future has no assertion",
                counterexample=u.counterexample(k),
            )
        )

    # (4) local correctness
    for t in tids:
        obligations.extend(check_future_stability(preds[t], u, ev))

    # (5) global correctness: {I_t1(F1) ∧ I_t2}_F2 Q {I_t1(F1)}
    for t1 in tids:
        for t2 in tids:
            if t1 == t2:
                continue
            obligations.extend(_global(u, ev, preds[t1], preds[t2]))
    return ObligationReport(obligations, len(u.space.states))


def _global(u: Universe, ev: _Evaluator, p1: FuturePredicate, p2: FuturePredicate) -> list[Obligation]:
    """Steps of ``p2.tid`` preserve ``p1``'s assertion for ``p1``'s current sub-future."""
    t1, t2 = p1.tid, p2.tid
    out: dict[tuple, Obligation] = {}
    for k, st, dk in u.space.edges:
        if st.tid != t2:
            continue
        n1, a1 = ev.resolve(p1, k)
        n2, a2 = ev.resolve(p2, k)
        if a1 is None or a2 is None:
            continue
        key = (t1, "+".join(n1), t2, "+".join(n2), st.action.line)
        ob = out.setdefault(key, Obligation("global", key))
        if not (ev.holds(a1, k) and ev.holds(a2, k)):
            continue
        ob.checked += 1
        # F1 is held fixed: the same assertion must hold after the step
        if not ev.holds(a1, dk) and ob.passed:
            ob.passed = False
            ob.counterexample = u.counterexample(k, st)
    return [out[k] for k in sorted(out, key=repr)]


__all__ = [
    "FuturePredicate",
    "Obligation",
    "ObligationReport",
    "OutlineError",
    "ProofOutline",
    "SCOPE",
    "SubFutureSpec",
    "Universe",
    "build_universe",
    "check_future_stability",
    "check_hoare",
    "check_og",
    "check_step_triple",
    "load_outline",
]
