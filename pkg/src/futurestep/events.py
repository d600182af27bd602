"""Per-value event expansion, dependency and preserved program order.

Each thread is unfolded into a tree: every load branches once per value in
the variable's domain, and every atomic command on a branch becomes one
event.  A root-to-leaf path is a thread execution; whole-program executions
are the product of the per-thread ones.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from os import PathLike
from typing import IO, Iterable, Iterator, Mapping

from .futures import Future, FutureError, FutureSet, _close
from .lang import (
    Action,
    Command,
    EvalError,
    If,
    Load,
    Program,
    RegAssign,
    Seq,
    Skip,
    Store,
    Update,
    While,
    eval_expr,
    expr_registers,
    iter_atomics,
)

DEFAULT_DOMAIN_CAP = 64


class DomainError(ValueError):
    """Value closure failed to stabilise under the cap."""


ValueDomain = dict[str, frozenset[int]]


# ---------------------------------------------------------------------------
# Value domains


def _store_values(cmd: Command, regs: dict[str, int], dom: Mapping[str, frozenset[int]], out: dict[str, set[int]]):
    """Every value a store/update may write, over all read choices."""

    def run(work: tuple[Command, ...], regs: dict[str, int]) -> None:
        while work:
            c, work = work[0], work[1:]
            if isinstance(c, Seq):
                work = c.items + work
            elif isinstance(c, If):
                work = ((c.then if eval_expr(c.guard, regs) else c.orelse),) + work
            elif isinstance(c, Store):
                out.setdefault(c.var, set()).add(int(eval_expr(c.expr, regs)))
            elif isinstance(c, Update):
                out.setdefault(c.var, set()).add(int(eval_expr(c.new, regs)))
            elif isinstance(c, RegAssign):
                regs = {**regs, c.reg: int(eval_expr(c.expr, regs))}
            elif isinstance(c, Load):
                for v in sorted(dom.get(c.var, {0})):
                    run(work, {**regs, c.reg: v})
                return
            elif isinstance(c, While):
                raise ValueError("value_closure needs a loop-free program")

    run((cmd,), dict(regs))


def value_closure(
    p: Program,
    seed: Mapping[str, Iterable[int]] | None = None,
    cap: int = DEFAULT_DOMAIN_CAP,
) -> ValueDomain:
    """Least per-variable value sets closed under every store.

    Starts from ``{0}`` plus the initial value and adds the value of every
    store under every combination of readable values until nothing changes.
    Variables given in ``seed`` keep exactly the seeded values.
    """
    seed = {k: frozenset(v) for k, v in (seed or {}).items()}
    dom: dict[str, set[int]] = {x: {0, p.init.get(x, 0)} for x in p.variables()}
    for x, vals in seed.items():
        dom[x] = set(vals)
    while True:
        frozen = {x: frozenset(v) for x, v in dom.items()}
        written: dict[str, set[int]] = {}
        for t in p.tids:
            _store_values(p.threads[t], p.initial_registers(t), frozen, written)
        changed = False
        for x, vals in written.items():
            if x in seed:
                continue
            new = vals - dom.setdefault(x, {0})
            if new:
                dom[x] |= new
                changed = True
                if len(dom[x]) > cap:
                    raise DomainError(
                        f"value domain of {x!r} exceeds {cap} values; give an explicit domain (e.g. --domain {x}=0..3)"
                    )
        if not changed:
            return {x: frozenset(v) for x, v in dom.items()}


# ---------------------------------------------------------------------------
# Event structure


@dataclass(frozen=True)
class Event:
    id: int
    tid: int
    action: Action
    parent: int | None  # immediate program-order predecessor on the branch
    depth: int


class EventStructure:
    """Events with labelling, program order (tree ancestry) and conflict."""

    def __init__(self, events: Mapping[int, Event]):
        self.events = dict(events)
        self._ancestors: dict[int, frozenset[int]] = {}
        for eid in sorted(self.events):
            e = self.events[eid]
            up = frozenset() if e.parent is None else self._ancestors[e.parent] | {e.parent}
            self._ancestors[eid] = up

    @property
    def labels(self) -> dict[int, Action]:
        return {i: e.action for i, e in self.events.items()}

    @property
    def tids(self) -> dict[int, int]:
        return {i: e.tid for i, e in self.events.items()}

    def po(self, a: int, b: int) -> bool:
        """``a`` is program-ordered strictly before ``b``."""
        return a in self._ancestors[b]

    def conflict(self, a: int, b: int) -> bool:
        if a == b:
            return False
        ea, eb = self.events[a], self.events[b]
        return ea.tid == eb.tid and not (self.po(a, b) or self.po(b, a))

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class _Node:
    event: int
    cmd: object
    data_srcs: frozenset[int]  # events defining registers the command uses
    ctrl_srcs: frozenset[int]  # loads tainting an enclosing guard


@dataclass(frozen=True)
class ThreadExecution:
    """One branch of a thread's event tree."""

    tid: int
    events: tuple[int, ...]  # program order
    nodes: tuple[_Node, ...]
    reads: Mapping[str, int]  # load line -> value read
    dp: frozenset[tuple[int, int]] = frozenset()
    ppo: frozenset[tuple[int, int]] = frozenset()


@dataclass(frozen=True)
class Execution:
    """A whole-program execution: one thread execution per thread."""

    parts: tuple[ThreadExecution, ...]

    @property
    def events(self) -> frozenset[int]:
        return frozenset(e for p in self.parts for e in p.events)

    @property
    def dp(self) -> frozenset[tuple[int, int]]:
        return frozenset().union(*(p.dp for p in self.parts))

    @property
    def ppo(self) -> frozenset[tuple[int, int]]:
        return frozenset().union(*(p.ppo for p in self.parts))

    def thread_of(self, e: int) -> int:
        for p in self.parts:
            if e in p.events:
                return p.tid
        raise KeyError(e)


class ExecutionSet:
    """Executions kept in product form: ``per_thread[t]`` lists thread ``t``'s."""

    def __init__(self, per_thread: Mapping[int, list[ThreadExecution]]):
        self.per_thread = dict(per_thread)

    def __len__(self) -> int:
        n = 1
        for v in self.per_thread.values():
            n *= len(v)
        return n

    def __iter__(self) -> Iterator[Execution]:
        keys = sorted(self.per_thread)
        for combo in itertools.product(*(self.per_thread[t] for t in keys)):
            yield Execution(tuple(combo))


def _action_for(cmd, regs: Mapping[str, int], read_value: int | None) -> Action:
    if isinstance(cmd, Store):
        return Action("W", cmd.label, cmd.var, wval=int(eval_expr(cmd.expr, regs)), mode="rel" if cmd.release else "rlx")
    if isinstance(cmd, Load):
        return Action("R", cmd.label, cmd.var, rval=read_value, mode="acq" if cmd.acquire else "rlx")
    if isinstance(cmd, Update):
        return Action(
            "U", cmd.label, cmd.var, rval=int(eval_expr(cmd.old, regs)), wval=int(eval_expr(cmd.new, regs)), mode="ra"
        )
    if isinstance(cmd, RegAssign):
        return Action("S", cmd.label, cmd.reg, wval=int(eval_expr(cmd.expr, regs)))
    raise TypeError(cmd)


def _expand_thread(
    p: Program, tid: int, dom: ValueDomain, events: dict[int, Event], next_id: list[int]
) -> list[ThreadExecution]:
    index: dict[tuple, int] = {}
    paths: list[ThreadExecution] = []

    def event_for(prefix: tuple, action: Action, parent: int | None, depth: int) -> int:
        key = prefix + (action,)
        eid = index.get(key)
        if eid is None:
            eid = next_id[0]
            next_id[0] += 1
            index[key] = eid
            events[eid] = Event(eid, tid, action, parent, depth)
        return eid

    # work items are (command, load events tainting enclosing guards)
    def run(work, regs, definer, taint, nodes, prefix, reads):
        while work:
            (c, gtaint), work = work[0], work[1:]
            if isinstance(c, Seq):
                work = tuple((d, gtaint) for d in c.items) + work
                continue
            if isinstance(c, If):
                g = eval_expr(c.guard, regs)
                extra = frozenset().union(*(taint.get(r, frozenset()) for r in expr_registers(c.guard)))
                work = (((c.then if g else c.orelse), gtaint | extra),) + work
                continue
            if isinstance(c, Skip):
                continue
            if isinstance(c, While):
                raise ValueError("expand_executions needs a loop-free program; unroll it first")
            used: frozenset[str] = frozenset()
            if isinstance(c, Store):
                used = expr_registers(c.expr)
            elif isinstance(c, Update):
                used = expr_registers(c.old) | expr_registers(c.new)
            elif isinstance(c, RegAssign):
                used = expr_registers(c.expr)
            data = frozenset(definer[r] for r in used if r in definer)
            ctrl = gtaint if isinstance(c, (Store, Update)) else frozenset()
            parent = nodes[-1].event if nodes else None
            if isinstance(c, Load):
                for v in sorted(dom.get(c.var, {0})):
                    a = _action_for(c, regs, v)
                    eid = event_for(prefix, a, parent, len(nodes))
                    node = _Node(eid, c, data, ctrl)
                    run(
                        work,
                        {**regs, c.reg: v},
                        {**definer, c.reg: eid},
                        {**taint, c.reg: frozenset((eid,))},
                        nodes + (node,),
                        prefix + (a,),
                        {**reads, c.label: v},
                    )
                return
            a = _action_for(c, regs, None)
            eid = event_for(prefix, a, parent, len(nodes))
            nodes = nodes + (_Node(eid, c, data, ctrl),)
            prefix = prefix + (a,)
            if isinstance(c, RegAssign):
                regs = {**regs, c.reg: a.wval}
                definer = {**definer, c.reg: eid}
                taint = {**taint, c.reg: frozenset().union(*(taint.get(r, frozenset()) for r in used))}
        paths.append(ThreadExecution(tid, tuple(n.event for n in nodes), nodes, reads))

    run(((p.threads[tid], frozenset()),), p.initial_registers(tid), {}, {}, (), (), {})
    return paths


def syntactic_dependency(ex: ThreadExecution, siblings: Iterable[ThreadExecution], labels: Mapping[int, Action]):
    """Dependency edges of one thread execution.

    Data edges run from the event defining a register to every event using
    it.  Control edges run from each load tainting an enclosing guard to the
    stores and updates inside, except when flipping that load's value (other
    loads unchanged) always yields a write of the same variable, value and
    mode anyway.
    """
    siblings = list(siblings)
    writes_of = {id(s): {_write_key(labels[e]) for e in s.events if labels[e].is_write} for s in siblings}
    dp: set[tuple[int, int]] = set()
    for node in ex.nodes:
        dp.update((src, node.event) for src in node.data_srcs)
        for src in node.ctrl_srcs:
            if _control_matters(src, node.event, ex, siblings, writes_of, labels):
                dp.add((src, node.event))
    return frozenset(dp)


def _write_key(a: Action) -> tuple:
    return (a.var, a.wval, a.mode)


def _control_matters(load, target, ex, siblings, writes_of, labels) -> bool:
    line = labels[load].line
    mine = ex.reads[line]
    key = _write_key(labels[target])
    for s in siblings:
        if s.reads.get(line, mine) == mine:
            continue
        if any(s.reads[k] != v for k, v in ex.reads.items() if k != line and k in s.reads):
            continue
        if key not in writes_of[id(s)]:
            return True
    return False


def preserved_ppo(ex: ThreadExecution, labels: Mapping[int, Action]) -> frozenset[tuple[int, int]]:
    """Program order kept by the memory model.

    Everything before a releasing write, everything after an acquiring read,
    and every pair of accesses to the same variable stay in program order.
    """
    evs = ex.events
    ppo: set[tuple[int, int]] = set()
    for i, a in enumerate(evs):
        la = labels[a]
        for b in evs[i + 1 :]:
            lb = labels[b]
            if lb.is_memory and lb.releasing and lb.is_write:
                ppo.add((a, b))
            elif la.is_memory and la.acquiring and la.is_read:
                ppo.add((a, b))
            elif la.is_memory and lb.is_memory and la.var == lb.var:
                ppo.add((a, b))
    return frozenset(ppo)


def expand_executions(p: Program, dom: ValueDomain) -> tuple[EventStructure, ExecutionSet]:
    """Event structure of ``p`` and its executions, with ``dp``/``ppo`` filled in."""
    if p.has_loops():
        raise ValueError("expand_executions needs a loop-free program; unroll it first")
    events: dict[int, Event] = {}
    next_id = [1]
    raw = {t: _expand_thread(p, t, dom, events, next_id) for t in p.tids}
    labels = {i: e.action for i, e in events.items()}
    per_thread = {}
    for t, paths in raw.items():
        done = []
        for ex in paths:
            dp = syntactic_dependency(ex, paths, labels)
            ppo = preserved_ppo(ex, labels)
            done.append(ThreadExecution(ex.tid, ex.events, ex.nodes, ex.reads, dp, ppo))
        per_thread[t] = done
    return EventStructure(events), ExecutionSet(per_thread)


# ---------------------------------------------------------------------------
# Futures from executions


@dataclass(frozen=True)
class ProgramFutures:
    """Initial futures of a program, kept per thread.

    ``per_thread[t]`` is ``F|t``; the whole future set is their product.
    """

    structure: EventStructure
    per_thread: Mapping[int, frozenset[Future]]

    @property
    def labels(self) -> dict[int, Action]:
        return self.structure.labels

    def future_set(self) -> FutureSet:
        """The full (product) set; its size multiplies across threads."""
        from .futures import product

        return FutureSet(frozenset(product(self.per_thread)), self.labels, self.structure.tids)

    def thread_set(self, t: int) -> FutureSet:
        return FutureSet(self.per_thread[t], self.labels, self.structure.tids)


def thread_future(ex: ThreadExecution) -> Future:
    return Future(frozenset(ex.events), _close(ex.dp | ex.ppo))


def initial_futures(p: Program, dom: ValueDomain) -> ProgramFutures:
    structure, execs = expand_executions(p, dom)
    per_thread = {t: frozenset(thread_future(ex) for ex in exs) for t, exs in execs.per_thread.items()}
    return ProgramFutures(structure, per_thread)


# ---------------------------------------------------------------------------
# Futures JSON


_KINDS = {"R", "W", "U", "S"}
_MODES = {"rlx", "rel", "acq", "ra"}


def _action_from_json(d: Mapping) -> Action:
    kind = d["kind"]
    mode = d.get("mode", "ra" if kind == "U" else "rlx")
    if kind not in _KINDS or mode not in _MODES:
        raise FutureError(f"bad action {d!r}")
    return Action(kind, str(d["line"]), d.get("var"), d.get("rval"), d.get("wval"), mode)


def _action_to_json(a: Action) -> dict:
    d: dict = {"kind": a.kind, "line": a.line, "var": a.var}
    if a.rval is not None:
        d["rval"] = a.rval
    if a.wval is not None:
        d["wval"] = a.wval
    d["mode"] = a.mode
    return d


def load_futures(source: str | PathLike | IO[str], program: Program | None = None) -> FutureSet:
    """Read a futures file; ``program`` enables the label check."""
    if hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    try:
        labels: dict[int, Action] = {}
        tids: dict[int, int] = {}
        for ev in doc["events"]:
            eid = int(ev["id"])
            if eid in labels:
                raise FutureError(f"duplicate event id {eid}")
            labels[eid] = _action_from_json(ev["label"])
            tids[eid] = int(ev["thread"])
        futures = set()
        for fd in doc["futures"]:
            evs = [int(e) for e in fd["events"]]
            for e in evs:
                if e not in labels:
                    raise FutureError(f"future mentions undeclared event {e}")
            futures.add(Future.build(evs, [(int(a), int(b)) for a, b in fd.get("order", [])]))
    except (KeyError, TypeError) as exc:
        raise FutureError(f"malformed futures file: {exc!r}") from None
    if program is not None:
        lines = {t: {a.label for a in iter_atomics(program.threads[t]) if a.label} for t in program.tids}
        for eid, a in labels.items():
            if a.line not in lines.get(tids[eid], ()):
                raise FutureError(f"event {eid} refers to line {a.line!r}, which thread {tids[eid]} does not have")
    return FutureSet(frozenset(futures), labels, tids)


def dump_futures(F: FutureSet) -> dict:
    """JSON-ready document in the same schema :func:`load_futures` reads."""
    used = sorted({e for f in F.futures for e in f.events} | set(F.labels))
    futs = sorted(
        ({"events": sorted(f.events), "order": sorted([a, b] for a, b in f.order)} for f in F.futures),
        key=lambda d: (d["events"], d["order"]),
    )
    return {
        "events": [{"id": e, "thread": F.tids[e], "label": _action_to_json(F.labels[e])} for e in used],
        "futures": futs,
    }


__all__ = [
    "DomainError",
    "Event",
    "EventStructure",
    "EvalError",
    "Execution",
    "ExecutionSet",
    "ProgramFutures",
    "ThreadExecution",
    "dump_futures",
    "expand_executions",
    "initial_futures",
    "load_futures",
    "preserved_ppo",
    "syntactic_dependency",
    "thread_future",
    "value_closure",
]
