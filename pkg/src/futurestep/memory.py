"""Tagged action graphs and the Read / Write / RMW memory rules.

A :class:`Graph` is an immutable snapshot.  Tags are insertion indices, so
``acts[g].tag == g``; the initial writes come first, one per variable in
sorted order, all by thread 0.  Besides ``sb``/``rf``/``mo`` each graph keeps
hb and eco predecessor masks up to date so that observability queries do not
recompute closures.  :func:`derived` recomputes everything from the
definitions and is what the caches are tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

from . import kernels
from .lang import Action


class StepError(ValueError):
    """A memory step whose side conditions fail."""


@dataclass(frozen=True, order=True)
class TaggedAction:
    tag: int
    action: Action
    tid: int

    @property
    def is_write(self) -> bool:
        return self.action.is_write

    @property
    def is_read(self) -> bool:
        return self.action.is_read

    @property
    def var(self) -> str | None:
        return self.action.var

    def short(self) -> str:
        return self.action.short()


def init_action(var: str, value: int) -> Action:
    return Action("W", "0", var, wval=value)


class Graph:
    """``(D, sb, rf, mo)`` plus incremental hb/eco caches."""

    __slots__ = ("acts", "rf", "mo", "hbp", "ecop", "ecos", "cw", "writes", "by_tid", "_key")

    def __init__(self, acts, rf, mo, hbp, ecop, ecos, cw, writes, by_tid):
        self.acts: tuple[TaggedAction, ...] = acts
        self.rf: tuple[int, ...] = rf  # read tag -> source write tag, -1 otherwise
        self.mo: Mapping[str, tuple[int, ...]] = mo  # per-variable write sequence
        self.hbp: tuple[int, ...] = hbp
        self.ecop: tuple[int, ...] = ecop
        self.ecos: tuple[int, ...] = ecos
        self.cw: int = cw
        self.writes: int = writes
        self.by_tid: Mapping[int, int] = by_tid  # tid -> mask of its events
        self._key = None

    # -- construction ------------------------------------------------------

    @classmethod
    def initial(cls, init: Mapping[str, int]) -> "Graph":
        acts = []
        for g, x in enumerate(sorted(init)):
            acts.append(TaggedAction(g, init_action(x, init[x]), 0))
        n = len(acts)
        allm = (1 << n) - 1
        return cls(
            tuple(acts),
            (-1,) * n,
            {a.var: (a.tag,) for a in acts},
            (0,) * n,
            (0,) * n,
            (0,) * n,
            0,
            allm,
            {0: allm} if n else {},
        )

    def __len__(self) -> int:
        return len(self.acts)

    def fresh_tag(self) -> int:
        return len(self.acts)

    def events_of(self, t: int) -> list[TaggedAction]:
        m = self.by_tid.get(t, 0)
        return [self.acts[g] for g in kernels.iter_bits(m)]

    def writes_to(self, x: str) -> tuple[int, ...]:
        return self.mo.get(x, ())

    def last_write(self, x: str) -> TaggedAction:
        return self.acts[self.mo[x][-1]]

    # -- relations as sets (for tests, dumps and the oracle) ---------------

    def sb_pairs(self) -> set[tuple[int, int]]:
        out = set()
        init = self.by_tid.get(0, 0)
        for a in self.acts:
            if a.tid == 0:
                continue
            before = (self.by_tid.get(a.tid, 0) | init) & ((1 << a.tag) - 1)
            out.update((b, a.tag) for b in kernels.iter_bits(before))
        return out

    def rf_pairs(self) -> set[tuple[int, int]]:
        return {(w, r) for r, w in enumerate(self.rf) if w >= 0}

    def mo_pairs(self) -> set[tuple[int, int]]:
        out = set()
        for seq in self.mo.values():
            for i, a in enumerate(seq):
                out.update((a, b) for b in seq[i + 1 :])
        return out

    # -- views ---------------------------------------------------------------

    def encountered_mask(self, t: int) -> int:
        evs = self.by_tid.get(t, 0)
        if not evs:
            return 0
        return kernels.encountered(self.hbp, self.ecop, evs, self.writes)

    def observable_by_var(self, t: int) -> dict[str, tuple[int, ...]]:
        ew = self.encountered_mask(t)
        out = {}
        for x, seq in self.mo.items():
            k = 0
            for i, w in enumerate(seq):
                if ew >> w & 1:
                    k = i
            out[x] = seq[k:]
        return out

    def observable(self, t: int, x: str) -> tuple[int, ...]:
        seq = self.mo.get(x, ())
        ew = self.encountered_mask(t)
        k = 0
        for i, w in enumerate(seq):
            if ew >> w & 1:
                k = i
        return seq[k:]

    # -- canonical identity ------------------------------------------------

    def key(self) -> tuple:
        """Identity up to tag renaming: events named by ``(tid, line)``."""
        if self._key is None:
            name = [(a.tid, a.action.line if a.tid else a.var) for a in self.acts]
            per_tid = {}
            for a in self.acts:
                if a.tid:
                    per_tid.setdefault(a.tid, []).append(a.action)
            rf = tuple(sorted((name[r], name[w]) for r, w in enumerate(self.rf) if w >= 0))
            mo = tuple((x, tuple(name[w] for w in seq)) for x, seq in sorted(self.mo.items()))
            init = tuple((a.var, a.action.wval) for a in self.acts if a.tid == 0)
            self._key = (init, tuple(sorted((t, tuple(v)) for t, v in per_tid.items())), rf, mo)
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"Graph({', '.join(a.short() for a in self.acts)})"


# ---------------------------------------------------------------------------
# Naive derived relations (reference definitions)


@dataclass(frozen=True)
class DerivedRelations:
    hb: frozenset[tuple[int, int]]
    fr: frozenset[tuple[int, int]]
    eco: frozenset[tuple[int, int]]


def _tclose(rel: Iterable[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    closed = set(rel)
    while True:
        extra = {(a, d) for a, b in closed for c, d in closed if b == c} - closed
        if not extra:
            return frozenset(closed)
        closed |= extra


def derived(g: Graph) -> DerivedRelations:
    """hb, fr and eco straight from their definitions."""
    acts = g.acts
    sb = g.sb_pairs()
    rf = g.rf_pairs()
    mo = g.mo_pairs()
    sync = {(w, r) for w, r in rf if acts[w].action.releasing and acts[r].action.acquiring}
    hb = _tclose(sb | sync)
    fr = frozenset((r, w2) for w, r in rf for w1, w2 in mo if w1 == w and r != w2)
    eco = _tclose(rf | mo | fr)
    return DerivedRelations(hb, fr, eco)


def encountered_writes(g: Graph, t: int, rel: DerivedRelations | None = None) -> frozenset[int]:
    """``{w | exists e of t. (w, e) in eco? ; hb?}`` from the definitions."""
    rel = rel or derived(g)
    mine = {a.tag for a in g.acts if a.tid == t}
    if not mine:
        return frozenset()
    hbq = mine | {a for a, b in rel.hb if b in mine}
    reach = hbq | {a for a, b in rel.eco if b in hbq}
    return frozenset(w for w in reach if g.acts[w].is_write)


def observable_writes(g: Graph, t: int, rel: DerivedRelations | None = None) -> frozenset[int]:
    ew = encountered_writes(g, t, rel)
    mo = g.mo_pairs()
    return frozenset(a.tag for a in g.acts if a.is_write and not any((a.tag, w2) in mo for w2 in ew))


def covered_writes(g: Graph) -> frozenset[int]:
    return frozenset(w for w, r in g.rf_pairs() if g.acts[r].action.kind == "U")


def cached_encountered(g: Graph, t: int) -> frozenset[int]:
    return frozenset(kernels.iter_bits(g.encountered_mask(t)))


def cached_observable(g: Graph, t: int) -> frozenset[int]:
    return frozenset(w for seq in g.observable_by_var(t).values() for w in seq)


def cached_covered(g: Graph) -> frozenset[int]:
    return frozenset(kernels.iter_bits(g.cw))


def recompute_masks(g: Graph) -> tuple[list[int], list[int]]:
    """hb and eco predecessor masks via the kernel closure (no caches)."""
    n = len(g)
    sb_s = [0] * n
    for a, b in g.sb_pairs():
        sb_s[a] |= 1 << b
    hb_s = list(sb_s)
    eco_s = [0] * n
    for w, r in g.rf_pairs():
        eco_s[w] |= 1 << r
        if g.acts[w].action.releasing and g.acts[r].action.acquiring:
            hb_s[w] |= 1 << r
    for a, b in g.mo_pairs():
        eco_s[a] |= 1 << b
    mo = g.mo_pairs()
    for w, r in g.rf_pairs():
        for w1, w2 in mo:
            if w1 == w and w2 != r:
                eco_s[r] |= 1 << w2
    hb_c = kernels.closure(hb_s)
    eco_c = kernels.closure(eco_s)
    return _transpose(hb_c, n), _transpose(eco_c, n)


def _transpose(succ: list[int], n: int) -> list[int]:
    pred = [0] * n
    for a in range(n):
        for b in kernels.iter_bits(succ[a]):
            pred[b] |= 1 << a
    return pred


# ---------------------------------------------------------------------------
# Graph updates


def insert_mo(mo: Iterable[tuple[int, int]], w: int, b: int) -> frozenset[tuple[int, int]]:
    """``mo ∪ (mo⇓w × {b}) ∪ ({b} × mo[w])`` on explicit pair sets."""
    mo = frozenset(mo)
    down = {w} | {a for a, c in mo if c == w}
    up = {c for a, c in mo if a == w}
    return mo | {(a, b) for a in down} | {(b, c) for c in up}


def add_event(g: Graph, e: TaggedAction, rf_src: int = -1, mo_after: int | None = None) -> Graph:
    """Append ``e`` sb-after its thread and the initial writes.

    ``rf_src`` and ``mo_after`` give the optional rf edge into ``e`` and the
    write ``e`` is placed immediately after in mo.
    """
    n = len(g.acts)
    if e.tag != n:
        raise StepError(f"tag {e.tag} is not fresh (next tag is {n})")
    if e.tid == 0:
        raise StepError("thread 0 only performs the initial writes")
    ebit = 1 << n
    acts = g.acts + (e,)
    # sb ∪ (rf ∩ Wr_R × Rd_A), closed
    sbm = g.by_tid.get(e.tid, 0) | g.by_tid.get(0, 0)
    hb_new = sbm | kernels.union_over(g.hbp, sbm)
    if rf_src >= 0 and g.acts[rf_src].action.releasing and e.action.acquiring:
        hb_new |= (1 << rf_src) | g.hbp[rf_src]
    hbp = g.hbp + (hb_new,)

    rf = g.rf + (rf_src,)
    mo = dict(g.mo)
    dpred = dsucc = 0
    if rf_src >= 0:
        dpred |= 1 << rf_src
        seq = g.mo[e.var]
        i = seq.index(rf_src)
        # fr: e before every write mo-after its source (excluding e itself)
        for w2 in seq[i + 1 :]:
            dsucc |= 1 << w2
    if mo_after is not None:
        seq = g.mo[e.var]
        i = seq.index(mo_after)
        for w1 in seq[: i + 1]:
            dpred |= 1 << w1
        for w2 in seq[i + 1 :]:
            dsucc |= 1 << w2
        # fr into e: reads of writes at or before the insertion point
        before = 0
        for w1 in seq[: i + 1]:
            before |= 1 << w1
        for r, src in enumerate(g.rf):
            if src >= 0 and before >> src & 1:
                dpred |= 1 << r
        mo[e.var] = seq[: i + 1] + (n,) + seq[i + 1 :]
    if e.action.is_write and mo_after is None:
        raise StepError("a write must be placed in mo")
    ecop = list(g.ecop)
    ecos = list(g.ecos)
    kernels.eco_extend(ecop, ecos, n, dpred, dsucc & ~ebit)
    cw = g.cw
    if e.action.kind == "U" and rf_src >= 0:
        cw |= 1 << rf_src
    by_tid = dict(g.by_tid)
    by_tid[e.tid] = by_tid.get(e.tid, 0) | ebit
    writes = g.writes | (ebit if e.action.is_write else 0)
    return Graph(acts, rf, mo, hbp, tuple(ecop), tuple(ecos), cw, writes, by_tid)


def _check_fresh(g: Graph, e: TaggedAction) -> None:
    if e.tag != len(g.acts):
        raise StepError(f"stale tag {e.tag}")


def step_read(g: Graph, e: TaggedAction, w: int) -> Graph:
    _check_fresh(g, e)
    a = e.action
    if a.kind != "R":
        raise StepError(f"{a} is not a read")
    src = g.acts[w].action
    if not src.is_write or src.var != a.var or src.wval != a.rval:
        raise StepError(f"{g.acts[w].short()} cannot satisfy {a.short()}")
    if w not in g.observable(e.tid, a.var):
        raise StepError(f"{g.acts[w].short()} is not observable by thread {e.tid}")
    return add_event(g, e, rf_src=w)


def step_write(g: Graph, e: TaggedAction, w: int) -> Graph:
    _check_fresh(g, e)
    a = e.action
    if a.kind != "W":
        raise StepError(f"{a} is not a write")
    if not g.acts[w].is_write or g.acts[w].var != a.var:
        raise StepError(f"{g.acts[w].short()} is not a write to {a.var}")
    if g.cw >> w & 1:
        raise StepError(f"{g.acts[w].short()} is covered by an update")
    if w not in g.observable(e.tid, a.var):
        raise StepError(f"{g.acts[w].short()} is not observable by thread {e.tid}")
    return add_event(g, e, mo_after=w)


def step_rmw(g: Graph, e: TaggedAction, w: int) -> Graph:
    _check_fresh(g, e)
    a = e.action
    if a.kind != "U":
        raise StepError(f"{a} is not an update")
    src = g.acts[w].action
    if not src.is_write or src.var != a.var or src.wval != a.rval:
        raise StepError(f"{g.acts[w].short()} cannot satisfy {a.short()}")
    if g.cw >> w & 1:
        raise StepError(f"{g.acts[w].short()} is covered by an update")
    if w not in g.observable(e.tid, a.var):
        raise StepError(f"{g.acts[w].short()} is not observable by thread {e.tid}")
    return add_event(g, e, rf_src=w, mo_after=w)


def step(g: Graph, e: TaggedAction, w: int) -> Graph:
    kind = e.action.kind
    if kind == "R":
        return step_read(g, e, w)
    if kind == "W":
        return step_write(g, e, w)
    if kind == "U":
        return step_rmw(g, e, w)
    raise StepError(f"{e.action} has no memory step")


def enabled_sources(g: Graph, t: int, a: Action) -> list[int]:
    """Writes ``w`` for which the memory step of ``a`` by ``t`` is enabled."""
    obs = g.observable(t, a.var)
    if a.kind == "R":
        return [w for w in obs if g.acts[w].action.wval == a.rval]
    if a.kind == "W":
        return [w for w in obs if not g.cw >> w & 1]
    if a.kind == "U":
        return [w for w in obs if not g.cw >> w & 1 and g.acts[w].action.wval == a.rval]
    raise StepError(f"{a} has no memory step")


# ---------------------------------------------------------------------------
# Building graphs by hand and dumping them


def build_graph(init: Mapping[str, int], steps: Iterable[tuple[int, Action, int]]) -> Graph:
    """Replay ``(tid, action, observed write tag)`` triples from ``init``."""
    g = Graph.initial(init)
    for tid, a, w in steps:
        g = step(g, TaggedAction(g.fresh_tag(), a, tid), w)
    return g


def dump_graph(g: Graph) -> dict:
    evs = [
        [a.tag, a.action.kind, a.action.line, a.action.var, a.action.rval, a.action.wval, a.action.mode, a.tid]
        for a in g.acts
    ]
    return {
        "events": evs,
        "sb": sorted([a, b] for a, b in g.sb_pairs()),
        "rf": sorted([a, b] for a, b in g.rf_pairs()),
        "mo": sorted([a, b] for a, b in g.mo_pairs()),
    }


def views_report(g: Graph, tids: Iterable[int]) -> str:
    """Canonical JSON of OW per thread and the fr/eco relations, by short name."""
    rel = derived(g)
    name = [a.short() for a in g.acts]

    def pairs(rel_pairs):
        return sorted([name[a], name[b]] for a, b in rel_pairs)

    doc = {
        "OW": {str(t): sorted(name[w] for w in observable_writes(g, t, rel)) for t in tids},
        "fr": pairs(rel.fr),
        "eco": {
            x: pairs((a, b) for a, b in rel.eco if g.acts[a].var == x and g.acts[b].var == x)
            for x in sorted(g.mo)
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
