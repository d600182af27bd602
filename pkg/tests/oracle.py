"""Brute-force axiomatic reference for straight-line relaxed programs.

Candidate executions are enumerated directly: every read picks any write to
its location, every location picks any modification order with the initial
write first.  A candidate is kept when

* ``po_loc ∪ rf ∪ mo ∪ fr`` is acyclic (coherence per location), and
* ``dp ∪ po_loc ∪ rf`` is acyclic, where ``dp`` is register data flow from
  a load into a later store.

Only loads, stores and register assignments are supported; this module shares
nothing with the operational explorer beyond the parser.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from futurestep.lang import Load, Program, RegAssign, Seq, Skip, Store, eval_expr, expr_registers


@dataclass(frozen=True)
class Ev:
    eid: int
    tid: int
    kind: str  # "R" | "W" | "A" (register assignment)
    var: str | None
    reg: str | None
    expr: object | None
    deps: frozenset[int]  # loads whose values flow into this event


def _flatten(cmd):
    if isinstance(cmd, Seq):
        for c in cmd.items:
            yield from _flatten(c)
    elif isinstance(cmd, Skip):
        return
    else:
        yield cmd


def _events(p: Program) -> tuple[list[Ev], dict[int, list[int]]]:
    evs: list[Ev] = []
    for x in p.variables():
        evs.append(Ev(len(evs), 0, "W", x, None, None, frozenset()))
    order: dict[int, list[int]] = {}
    for t in p.tids:
        flow: dict[str, frozenset[int]] = {}
        order[t] = []
        for c in _flatten(p.threads[t]):
            eid = len(evs)
            if isinstance(c, Load):
                e = Ev(eid, t, "R", c.var, c.reg, None, frozenset())
                flow[c.reg] = frozenset({eid})
            elif isinstance(c, Store):
                deps = frozenset().union(*(flow.get(r, frozenset()) for r in expr_registers(c.expr)))
                e = Ev(eid, t, "W", c.var, None, c.expr, deps)
            elif isinstance(c, RegAssign):
                deps = frozenset().union(*(flow.get(r, frozenset()) for r in expr_registers(c.expr)))
                e = Ev(eid, t, "A", None, c.reg, c.expr, deps)
                flow[c.reg] = deps
            else:
                raise NotImplementedError(f"oracle does not support {type(c).__name__}")
            evs.append(e)
            order[t].append(eid)
    return evs, order


def _acyclic(n: int, edges) -> bool:
    succ = [[] for _ in range(n)]
    indeg = [0] * n
    for a, b in edges:
        succ[a].append(b)
        indeg[b] += 1
    stack = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while stack:
        a = stack.pop()
        seen += 1
        for b in succ[a]:
            indeg[b] -= 1
            if indeg[b] == 0:
                stack.append(b)
    return seen == n


def _frozen(regs: dict[int, dict[str, int]], mem: dict[str, int]):
    return (
        tuple(sorted((t, tuple(sorted(r.items()))) for t, r in regs.items())),
        tuple(sorted(mem.items())),
    )


def outcomes(p: Program) -> set:
    """Set of ``(registers, memory)`` pairs, in :class:`Outcome` layout."""
    evs, order = _events(p)
    n = len(evs)
    init_val = {x: p.init.get(x, 0) for x in p.variables()}
    reads = [e for e in evs if e.kind == "R"]
    writes_to: dict[str, list[int]] = {}
    for e in evs:
        if e.kind == "W":
            writes_to.setdefault(e.var, []).append(e.eid)
    po_loc = set()
    for t, ids in order.items():
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                if evs[a].var is not None and evs[a].var == evs[b].var:
                    po_loc.add((a, b))
    dp = {(d, e.eid) for e in evs if e.kind == "W" for d in e.deps}
    result = set()
    for choice in itertools.product(*(writes_to[r.var] for r in reads)):
        rf = {r.eid: w for r, w in zip(reads, choice)}
        rf_edges = {(w, r) for r, w in rf.items()}
        if not _acyclic(n, dp | po_loc | rf_edges):
            continue
        value: dict[int, int] = {}

        def val(eid: int) -> int:
            if eid in value:
                return value[eid]
            e = evs[eid]
            if e.tid == 0:
                v = init_val[e.var]
            elif e.kind == "R":
                v = val(rf[eid])
            else:
                v = int(eval_expr(e.expr, regs_before(eid)))
            value[eid] = v
            return v

        def regs_before(eid: int) -> dict[str, int]:
            e = evs[eid]
            regs = dict(p.initial_registers(e.tid))
            for other in order[e.tid]:
                if other == eid:
                    break
                o = evs[other]
                if o.kind in ("R", "A") and o.reg in expr_registers(e.expr):
                    regs[o.reg] = val(other)
            return regs

        for x in writes_to:
            for w in writes_to[x]:
                val(w)
        for r in reads:
            val(r.eid)
        mo_choices = []
        for x in sorted(writes_to):
            init, *rest = writes_to[x]
            mo_choices.append([(x, (init, *perm)) for perm in itertools.permutations(rest)])
        for mos in itertools.product(*mo_choices):
            mo_edges = set()
            last = {}
            for x, seq in mos:
                last[x] = value[seq[-1]]
                for i, a in enumerate(seq):
                    mo_edges.update((a, b) for b in seq[i + 1 :])
            fr = {(r, w2) for r, w in rf.items() for w1, w2 in mo_edges if w1 == w}
            if not _acyclic(n, po_loc | rf_edges | mo_edges | fr):
                continue
            regs = {}
            for t in p.tids:
                rs = dict(p.initial_registers(t))
                for eid in order[t]:
                    e = evs[eid]
                    if e.kind == "R":
                        rs[e.reg] = value[eid]
                    elif e.kind == "A":
                        rs[e.reg] = int(eval_expr(e.expr, rs))
                regs[t] = rs
            result.add(_frozen(regs, last))
    return result
