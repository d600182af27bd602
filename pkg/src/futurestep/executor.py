"""Future-Step exploration, outcome collection and trace replay."""

from __future__ import annotations

import multiprocessing
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .events import ProgramFutures, ValueDomain, initial_futures, value_closure
from .futures import Future, FutureError, FutureSet, collapse_labels, label_item, thread_factors
from .lang import (
    Action,
    Load,
    Program,
    RegAssign,
    Store,
    Update,
    eval_expr,
    unroll,
)
from .memory import Graph, TaggedAction, enabled_sources, step

DEFAULT_BUDGET = 1_000_000


class BudgetExceeded(RuntimeError):
    def __init__(self, budget: int):
        super().__init__(f"state budget of {budget} configurations exceeded")
        self.budget = budget


class TraceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Thread-local semantics


def thread_local_step(cmd, regs: Mapping[str, int], chosen: int | None = None) -> tuple[Action, dict[str, int]]:
    """Action of an atomic command and the register file after it."""
    regs = dict(regs)
    if isinstance(cmd, Store):
        if chosen is not None:
            raise ValueError("stores take no read value")
        return Action("W", cmd.label, cmd.var, wval=int(eval_expr(cmd.expr, regs)), mode="rel" if cmd.release else "rlx"), regs
    if isinstance(cmd, Load):
        if chosen is None:
            raise ValueError("a load needs the value it reads")
        regs[cmd.reg] = chosen
        return Action("R", cmd.label, cmd.var, rval=chosen, mode="acq" if cmd.acquire else "rlx"), regs
    if isinstance(cmd, Update):
        m = int(eval_expr(cmd.old, regs))
        if chosen is not None and chosen != m:
            raise ValueError(f"update expects {m}, got {chosen}")
        return Action("U", cmd.label, cmd.var, rval=m, wval=int(eval_expr(cmd.new, regs)), mode="ra"), regs
    if isinstance(cmd, RegAssign):
        v = int(eval_expr(cmd.expr, regs))
        regs[cmd.reg] = v
        return Action("S", cmd.label, cmd.reg, wval=v), regs
    raise TypeError(f"not an atomic command: {cmd!r}")


# ---------------------------------------------------------------------------
# Configurations


Regs = tuple[tuple[int, tuple[tuple[str, int], ...]], ...]


def freeze_regs(regs: Mapping[int, Mapping[str, int]]) -> Regs:
    return tuple((t, tuple(sorted(r.items()))) for t, r in sorted(regs.items()))


@dataclass(frozen=True)
class Configuration:
    """``(⦃Q⦄, (σ, γ), F)``.

    ``futures[i]`` is the future set of component ``i`` of the explorer (one
    component per thread when the futures factor); ⦃Q⦄ is the set of lines
    still mentioned by those futures.
    """

    graph: Graph
    regs: Regs
    futures: tuple[frozenset[Future], ...]

    def key(self) -> tuple:
        return (self.graph.key(), self.regs, self.futures)

    def registers(self, t: int) -> dict[str, int]:
        for tid, r in self.regs:
            if tid == t:
                return dict(r)
        return {}

    def all_registers(self) -> dict[str, int]:
        out = {}
        for _, r in self.regs:
            out.update(r)
        return out


@dataclass(frozen=True, order=True)
class TraceStep:
    tid: int
    action: Action
    observed: str | None = None  # short name of the write read from or placed after

    def __str__(self) -> str:
        a = self.action
        vals = " ".join(str(v) for v in a.values())
        s = f"t {self.tid} {a.kind} {a.line} {a.var} {vals}".rstrip()
        if a.mode != ("ra" if a.kind == "U" else "rlx"):
            s += f" {a.mode}"
        return s


@dataclass(frozen=True, order=True)
class Outcome:
    registers: Regs
    memory: tuple[tuple[str, int], ...]

    def reg(self, name: str) -> int:
        for _, r in self.registers:
            for k, v in r:
                if k == name:
                    return v
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "registers": {str(t): dict(r) for t, r in self.registers},
            "memory": dict(self.memory),
        }

    def __str__(self) -> str:
        regs = " ".join(f"{k}={v}" for _, r in self.registers for k, v in r)
        mem = " ".join(f"[{x}]={v}" for x, v in self.memory)
        return f"{regs} | {mem}".strip(" |") or "(empty)"


def outcome_of(c: Configuration) -> Outcome:
    g = c.graph
    return Outcome(c.regs, tuple((x, g.acts[seq[-1]].action.wval) for x, seq in sorted(g.mo.items())))


# ---------------------------------------------------------------------------
# Explorer


@dataclass
class Options:
    unroll: int = 0
    domain: Mapping[str, Iterable[int]] | None = None
    budget: int = DEFAULT_BUDGET
    jobs: int = 1
    collapse: bool = False  # explore with label futures instead of event futures


class Explorer:
    """Transition system of one program under one future set."""

    def __init__(
        self,
        program: Program,
        futures: ProgramFutures | FutureSet | None = None,
        domain: ValueDomain | None = None,
        options: Options | None = None,
    ):
        self.options = options or Options()
        p = program
        if p.has_loops():
            p = unroll(p, self.options.unroll)
        self.program = p
        if futures is None:
            self.domain = domain or value_closure(p, self.options.domain)
            futures = initial_futures(p, self.domain)
        else:
            self.domain = domain or {}
        self.tids = p.tids
        self._setup(futures)

    def _setup(self, futures: ProgramFutures | FutureSet) -> None:
        comps: list[tuple[tuple[int, ...], frozenset[Future]]] = []
        if isinstance(futures, ProgramFutures):
            labels = futures.labels
            tids = futures.structure.tids
            for t in self.tids:
                comps.append(((t,), futures.per_thread.get(t, frozenset({Future(frozenset())}))))
            fs = FutureSet(frozenset(), labels, tids)
        else:
            fs = futures
            parts = thread_factors(fs, self.tids)
            if parts is None:
                comps.append((tuple(self.tids), fs.futures))
            else:
                for t in self.tids:
                    comps.append(((t,), parts[t]))
        if self.options.collapse and not fs.collapsed:
            new = []
            for ts, fut in comps:
                res = collapse_labels(fs.with_futures(fut))
                if not res:
                    raise FutureError(f"futures of threads {ts} cannot be collapsed: {res.reason}")
                new.append((ts, res.futures))
            comps = new
            fs = FutureSet(frozenset(), {}, {label_item(a): fs.tids[g] for g, a in fs.labels.items()}, True)
        self.future_set = fs
        self.collapsed = fs.collapsed
        self.comp_of = {t: i for i, (ts, _) in enumerate(comps) for t in ts}
        self.comp_tids = tuple(ts for ts, _ in comps)
        self.initial_futures = tuple(f for _, f in comps)
        self.item_tid = dict(fs.tids)
        self.item_line = (
            {g: g.line for g in fs.tids} if fs.collapsed else {g: a.line for g, a in fs.labels.items()}
        )
        if not fs.collapsed:
            index: dict[Action, set] = {}
            for g, a in fs.labels.items():
                index.setdefault(a, set()).add(g)
            self._carriers = {a: frozenset(s) for a, s in index.items()}
        self._line_cmd: dict[tuple[int, str], object] = {}
        for t in self.tids:
            from .lang import iter_atomics

            for c in iter_atomics(self.program.threads[t]):
                if getattr(c, "label", None):
                    self._line_cmd[(t, c.label)] = c

    # -- futures helpers -----------------------------------------------------

    def carriers(self, a: Action) -> frozenset:
        if self.collapsed:
            return frozenset((label_item(a),))
        return self._carriers.get(a, frozenset())

    def consume(self, a: Action, futures: frozenset[Future]) -> frozenset[Future]:
        ids = self.carriers(a)
        if not ids:
            return frozenset()
        out = set()
        for f in futures:
            if f.minimal() & ids:
                out.add(f.restrict(f.events - ids))
        return frozenset(out)

    def thread_futures(self, c: Configuration, t: int) -> frozenset[Future]:
        """``F|t`` of a configuration."""
        fut = c.futures[self.comp_of[t]]
        if len(self.comp_tids[self.comp_of[t]]) == 1:
            return fut
        return frozenset(f.restrict(g for g in f.events if self.item_tid[g] == t) for f in fut)

    def remaining_lines(self, c: Configuration, t: int) -> frozenset[str]:
        """⦃Q⦄(t) after pruning: lines still mentioned by some future."""
        fut = c.futures[self.comp_of[t]]
        return frozenset(self.item_line[g] for f in fut for g in f.events if self.item_tid[g] == t)

    def is_terminal(self, c: Configuration) -> bool:
        return all(all(not f.events for f in fut) for fut in c.futures)

    # -- configurations ------------------------------------------------------

    def initial(self, init: Mapping[str, int] | None = None) -> Configuration:
        p = self.program
        mem = {x: p.init.get(x, 0) for x in p.variables()}
        if init:
            mem.update(init)
        g = Graph.initial(mem)
        regs = freeze_regs({t: p.initial_registers(t) for t in self.tids})
        return Configuration(g, regs, self.initial_futures)

    def successors(self, c: Configuration, only: int | None = None) -> Iterator[tuple[TraceStep, Configuration]]:
        """All Future-Step successors, optionally for one thread only."""
        for t in self.tids if only is None else (only,):
            ci = self.comp_of[t]
            fut = c.futures[ci]
            lines = sorted(
                {self.item_line[g] for f in fut for g in f.minimal() if self.item_tid[g] == t},
            )
            regs = c.registers(t)
            for line in lines:
                cmd = self._line_cmd[(t, line)]
                yield from self._command_steps(c, t, ci, cmd, regs)

    def _with(self, c: Configuration, t: int, ci: int, graph: Graph, regs, newf) -> Configuration:
        allregs = dict(c.regs)
        allregs[t] = tuple(sorted(regs.items()))
        futures = c.futures[:ci] + (newf,) + c.futures[ci + 1 :]
        return Configuration(graph, tuple(sorted(allregs.items())), futures)

    def _command_steps(self, c, t, ci, cmd, regs):
        g = c.graph
        fut = c.futures[ci]
        if isinstance(cmd, Load):
            by_val: dict[int, list[int]] = {}
            for w in g.observable(t, cmd.var):
                by_val.setdefault(g.acts[w].action.wval, []).append(w)
            for v, ws in sorted(by_val.items()):
                a, r2 = thread_local_step(cmd, regs, v)
                newf = self.consume(a, fut)
                if not newf:
                    continue
                for w in ws:
                    e = TaggedAction(g.fresh_tag(), a, t)
                    yield TraceStep(t, a, g.acts[w].short()), self._with(c, t, ci, step(g, e, w), r2, newf)
            return
        a, r2 = thread_local_step(cmd, regs)
        newf = self.consume(a, fut)
        if not newf:
            return
        if a.kind == "S":
            yield TraceStep(t, a), self._with(c, t, ci, g, r2, newf)
            return
        for w in enabled_sources(g, t, a):
            e = TaggedAction(g.fresh_tag(), a, t)
            yield TraceStep(t, a, g.acts[w].short()), self._with(c, t, ci, step(g, e, w), r2, newf)


def future_step(ex: Explorer, c: Configuration) -> list[Configuration]:
    return [d for _, d in ex.successors(c)]


# ---------------------------------------------------------------------------
# Exhaustive search


@dataclass
class StateSpace:
    """Reachable configurations with parent pointers (and optionally edges)."""

    explorer: Explorer
    roots: list[tuple]
    states: dict[tuple, Configuration]
    parent: dict[tuple, tuple[tuple, TraceStep] | None]
    edges: list[tuple[tuple, TraceStep, tuple]] | None = None
    terminals: list[tuple] = field(default_factory=list)
    stuck: list[tuple] = field(default_factory=list)

    def trace_to(self, key: tuple) -> list[TraceStep]:
        out = []
        cur = self.parent.get(key)
        while cur is not None:
            pk, st = cur
            out.append(st)
            cur = self.parent.get(pk)
        out.reverse()
        return out


def search(
    ex: Explorer,
    roots: Sequence[Configuration],
    budget: int | None = None,
    keep_edges: bool = False,
) -> StateSpace:
    budget = ex.options.budget if budget is None else budget
    states: dict[tuple, Configuration] = {}
    parent: dict[tuple, tuple | None] = {}
    edges: list | None = [] if keep_edges else None
    space = StateSpace(ex, [], states, parent, edges)
    queue: deque[tuple] = deque()
    for r in roots:
        k = r.key()
        if k not in states:
            states[k] = r
            parent[k] = None
            space.roots.append(k)
            queue.append(k)
    while queue:
        k = queue.popleft()
        c = states[k]
        any_succ = False
        for st, d in ex.successors(c):
            any_succ = True
            dk = d.key()
            if edges is not None:
                edges.append((k, st, dk))
            if dk not in states:
                if len(states) >= budget:
                    raise BudgetExceeded(budget)
                states[dk] = d
                parent[dk] = (k, st)
                queue.append(dk)
        if not any_succ:
            (space.terminals if ex.is_terminal(c) else space.stuck).append(k)
    return space


@dataclass
class ExploreResult:
    outcomes: dict[Outcome, list[TraceStep]]  # outcome -> witness trace
    terminals: int
    stuck: list[list[TraceStep]]
    states: int
    final_graphs: list[Graph] = field(default_factory=list)
    final_configs: list[Configuration] = field(default_factory=list)

    def outcome_set(self) -> frozenset[Outcome]:
        return frozenset(self.outcomes)

    def values(self, *regs: str) -> set[tuple[int, ...]]:
        return {tuple(o.reg(r) for r in regs) for o in self.outcomes}


def _witness_key(tr: list[TraceStep]):
    return (len(tr), [str(s) for s in tr])


def _result_from(space: StateSpace) -> ExploreResult:
    outcomes: dict[Outcome, list[TraceStep]] = {}
    finals = []
    for k in space.terminals:
        c = space.states[k]
        finals.append(c)
        o = outcome_of(c)
        tr = space.trace_to(k)
        if o not in outcomes or _witness_key(tr) < _witness_key(outcomes[o]):
            outcomes[o] = tr
    stuck = [space.trace_to(k) for k in space.stuck]
    return ExploreResult(
        outcomes, len(space.terminals), stuck, len(space.states), [c.graph for c in finals], finals
    )


_WORKER: dict = {}


def _worker(idx: list[int]) -> ExploreResult:
    ex: Explorer = _WORKER["ex"]
    first = _WORKER["first"]
    space = search(ex, [first[i][1] for i in idx])
    first_step = {first[i][1].key(): first[i][0] for i in idx}
    res = _result_from(space)

    def rooted(k: tuple) -> TraceStep:
        while space.parent[k] is not None:
            k = space.parent[k][0]
        return first_step[k]

    outcomes: dict[Outcome, list[TraceStep]] = {}
    for k in space.terminals:
        tr = [rooted(k)] + space.trace_to(k)
        o = outcome_of(space.states[k])
        if o not in outcomes or _witness_key(tr) < _witness_key(outcomes[o]):
            outcomes[o] = tr
    return ExploreResult(outcomes, res.terminals, res.stuck, res.states, res.final_graphs, res.final_configs)


def explore(
    program: Program,
    options: Options | None = None,
    futures: ProgramFutures | FutureSet | None = None,
    explorer: Explorer | None = None,
) -> ExploreResult:
    """Every outcome reachable from the initial configuration.

    With ``jobs > 1`` the first-level successors are split across worker
    processes and the results united; the outcome set does not depend on the
    split.
    """
    ex = explorer or Explorer(program, futures, options=options)
    root = ex.initial()
    jobs = ex.options.jobs
    if jobs <= 1:
        return _result_from(search(ex, [root]))
    first = sorted(ex.successors(root), key=lambda sc: repr(sc[1].key()))
    if not first:
        return _result_from(search(ex, [root]))
    _WORKER.update(ex=ex, first=first)
    chunks = [list(range(i, len(first), jobs)) for i in range(min(jobs, len(first)))]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(len(chunks)) as pool:
        parts = pool.map(_worker, chunks)
    outcomes: dict = {}
    for part in parts:
        for o, tr in part.outcomes.items():
            if o not in outcomes or _witness_key(tr) < _witness_key(outcomes[o]):
                outcomes[o] = tr
    total = 1 + sum(p.states for p in parts)
    if total > ex.options.budget:
        raise BudgetExceeded(ex.options.budget)
    return ExploreResult(
        outcomes,
        sum(p.terminals for p in parts),
        [s for p in parts for s in p.stuck],
        total,
        [g for p in parts for g in p.final_graphs],
        [c for p in parts for c in p.final_configs],
    )


# ---------------------------------------------------------------------------
# Traces


_ARITY = {"R": 1, "W": 1, "U": 2, "S": 1}


def parse_trace(text: str) -> list[tuple[int, Action]]:
    """``t <tid> <kind> <line> <var> <vals..> [mode]`` per non-blank line."""
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] != "t":
                raise TraceError(f"line {n}: expected 't <tid> ...'")
            tid = int(parts[1])
            kind = parts[2]
            if kind not in _ARITY:
                raise TraceError(f"line {n}: unknown action kind {kind!r}")
            label, var = parts[3], parts[4]
            k = _ARITY[kind]
            vals = [int(v) for v in parts[5 : 5 + k]]
            if len(vals) != k:
                raise TraceError(f"line {n}: {kind} needs {k} value(s)")
            rest = parts[5 + k :]
            mode = rest[0] if rest else ("ra" if kind == "U" else "rlx")
            if len(rest) > 1:
                raise TraceError(f"line {n}: trailing tokens {rest[1:]}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, TraceError):
                raise
            raise TraceError(f"line {n}: {exc}") from None
        if kind == "R":
            a = Action("R", label, var, rval=vals[0], mode=mode)
        elif kind == "U":
            a = Action("U", label, var, rval=vals[0], wval=vals[1], mode=mode)
        else:
            a = Action(kind, label, var, wval=vals[0], mode=mode)
        out.append((tid, a))
    return out


@dataclass(frozen=True)
class ReplayVerdict:
    allowed: bool
    reason: str = ""
    witness: tuple[TraceStep, ...] = ()

    def __bool__(self) -> bool:
        return self.allowed

    def __str__(self) -> str:
        return "ALLOWED" if self.allowed else "DISALLOWED"


def replay_trace(
    program: Program,
    trace: Sequence[tuple[int, Action]],
    options: Options | None = None,
    explorer: Explorer | None = None,
    lines_only: bool = False,
) -> ReplayVerdict:
    """Is there a Future-Step run performing ``trace`` in order?

    Register assignments not listed in the trace run silently whenever they
    are enabled.  rf/mo choices are existential.  With ``lines_only`` only
    the thread, kind and line of each entry must match, so read and written
    values are free.
    """
    ex = explorer or Explorer(program, options=options)
    known = set(ex._line_cmd)
    listed_silent = {(t, a.line) for t, a in trace if a.kind == "S"}
    for t, a in trace:
        if (t, a.line) not in known:
            raise TraceError(f"thread {t} has no line {a.line!r}")

    def matches(st: TraceStep, want: tuple[int, Action]) -> bool:
        t, a = want
        if st.tid != t:
            return False
        if lines_only:
            return st.action.kind == a.kind and st.action.line == a.line
        return st.action == a

    start = ex.initial()
    seen: set = set()
    stack = [(start, 0, ())]
    furthest = 0
    while stack:
        c, i, path = stack.pop()
        key = (c.key(), i)
        if key in seen:
            continue
        seen.add(key)
        furthest = max(furthest, i)
        if i == len(trace):
            return ReplayVerdict(True, "", path)
        if len(seen) > ex.options.budget:
            raise BudgetExceeded(ex.options.budget)
        for st, d in ex.successors(c):
            if matches(st, trace[i]):
                stack.append((d, i + 1, path + (st,)))
            elif st.action.kind == "S" and (st.tid, st.action.line) not in listed_silent:
                stack.append((d, i, path + (st,)))
    t, a = trace[furthest]
    return ReplayVerdict(False, f"no run performs entry {furthest + 1} (thread {t}: {a.short()}) at that point")


__all__ = [
    "BudgetExceeded",
    "Configuration",
    "ExploreResult",
    "Explorer",
    "Options",
    "Outcome",
    "ReplayVerdict",
    "StateSpace",
    "TraceError",
    "TraceStep",
    "explore",
    "future_step",
    "outcome_of",
    "parse_trace",
    "replay_trace",
    "search",
    "thread_local_step",
]
