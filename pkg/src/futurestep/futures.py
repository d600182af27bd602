"""Futures: partially ordered sets of pending events, and their algebra.

A :class:`FutureSet` pairs a set of :class:`Future` values with the
labelling that connects their items to actions.  Items are either event ids
(``int``) or :class:`LabelItem` values once futures have been collapsed to
line labels.
"""

from __future__ import annotations

import itertools
from functools import cached_property
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator, Mapping

from .lang import Action

Item = Hashable
Matcher = Callable[[Item, Action], bool]


class FutureError(ValueError):
    pass


def _close(order: Iterable[tuple[Item, Item]]) -> frozenset[tuple[Item, Item]]:
    succ: dict[Item, set[Item]] = {}
    for a, b in order:
        succ.setdefault(a, set()).add(b)
    closed = set()
    for a in list(succ):
        stack = list(succ[a])
        seen: set[Item] = set()
        while stack:
            b = stack.pop()
            if b in seen:
                continue
            seen.add(b)
            stack.extend(succ.get(b, ()))
        closed.update((a, b) for b in seen)
    return frozenset(closed)


@dataclass(frozen=True)
class Future:
    """Items ``events`` with a strict partial order ``order``.

    The order is stored transitively closed; construct through
    :meth:`build` when the input may not be.
    """

    events: frozenset
    order: frozenset = frozenset()
    _hash: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.events, self.order)))

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def build(cls, events: Iterable[Item], order: Iterable[tuple[Item, Item]] = ()) -> "Future":
        evs = frozenset(events)
        closed = _close(order)
        for a, b in closed:
            if a == b:
                raise FutureError(f"cyclic order through {a!r}")
            if a not in evs or b not in evs:
                raise FutureError(f"order edge {(a, b)!r} leaves the event set")
        return cls(evs, closed)

    @cached_property
    def _minimal(self) -> frozenset:
        return self.events - {b for _, b in self.order}

    def minimal(self) -> frozenset:
        return self._minimal

    def restrict(self, keep: Iterable[Item]) -> "Future":
        keep = self.events & frozenset(keep)
        return Future(keep, frozenset(p for p in self.order if p[0] in keep and p[1] in keep))

    def __len__(self) -> int:
        return len(self.events)

    def __str__(self) -> str:
        return _show(self)


def _show(f: Future) -> str:
    ordered = sorted(f.order, key=repr)
    # keep only covering edges for display
    cover = [(a, b) for a, b in ordered if not any((a, c) in f.order and (c, b) in f.order for c in f.events)]
    touched = {x for p in cover for x in p}
    parts = [f"{a}<{b}" for a, b in cover] + [str(x) for x in sorted(f.events - touched, key=repr)]
    return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True, order=True)
class LabelItem:
    """Label-level item: a line label plus the read value for reads."""

    line: str
    rval: int | None = None

    def __str__(self) -> str:
        return self.line if self.rval is None else f"{self.line}@{self.rval}"


def label_item(action: Action) -> LabelItem:
    return LabelItem(action.line, action.rval if action.is_read else None)


def event_matcher(labels: Mapping[Item, Action]) -> Matcher:
    return lambda item, a: labels[item] == a


def label_matcher(item: LabelItem, a: Action) -> bool:
    return item.line == a.line and item.rval == (a.rval if a.is_read else None)


# ---------------------------------------------------------------------------
# Core operations.  ``match`` decides whether an item carries action ``a``.


def available(a: Action, f: Future, match: Matcher) -> bool:
    """True iff some minimal item of ``f`` carries ``a``."""
    return any(match(g, a) for g in f.minimal())


def consume(a: Action, f: Future, match: Matcher) -> Future:
    """``a ▷ f``: drop every item carrying ``a``; the order is restricted."""
    if not available(a, f, match):
        raise FutureError(f"{a} is not available in {f}")
    return f.restrict(g for g in f.events if not match(g, a))


def candidates(a: Action, futures: Iterable[Future], match: Matcher) -> frozenset[Future]:
    return frozenset(consume(a, f, match) for f in futures if available(a, f, match))


@dataclass(frozen=True)
class FutureSet:
    """A set of futures with the labelling of their items.

    ``labels`` maps event items to actions (empty for label futures) and
    ``tids`` maps every item to its thread.
    """

    futures: frozenset[Future]
    labels: Mapping[Item, Action] = field(default_factory=dict, compare=False)
    tids: Mapping[Item, int] = field(default_factory=dict, compare=False)
    collapsed: bool = False

    def match(self, item: Item, a: Action) -> bool:
        if self.collapsed:
            return label_matcher(item, a)
        return self.labels[item] == a

    @property
    def matcher(self) -> Matcher:
        return label_matcher if self.collapsed else event_matcher(self.labels)

    def with_futures(self, futures: Iterable[Future]) -> "FutureSet":
        return FutureSet(frozenset(futures), self.labels, self.tids, self.collapsed)

    def __iter__(self) -> Iterator[Future]:
        return iter(self.futures)

    def __len__(self) -> int:
        return len(self.futures)

    def __str__(self) -> str:
        return "{" + ", ".join(sorted(str(f) for f in self.futures)) + "}"

    def thread_ids(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.tids.values())))


def candidate_futures(a: Action, F: FutureSet) -> FutureSet:
    """``a ▷ F``; ``a`` is enabled in ``F`` iff the result is non-empty."""
    return F.with_futures(candidates(a, F.futures, F.matcher))


def restrict_to_thread(F: FutureSet, t: int) -> FutureSet:
    return F.with_futures(f.restrict(g for g in f.events if F.tids.get(g) == t) for f in F.futures)


def thread_factors(F: FutureSet, tids: Iterable[int]) -> dict[int, frozenset[Future]] | None:
    """Per-thread restrictions when ``F`` is their full product, else ``None``."""
    tids = tuple(tids)
    parts = {t: restrict_to_thread(F, t).futures for t in tids}
    size = 1
    for t in tids:
        size *= len(parts[t])
    if size != len(F.futures):
        return None
    for f in F.futures:
        for t in tids:
            if f.restrict(g for g in f.events if F.tids.get(g) == t) not in parts[t]:
                return None
    return parts


def product(parts: Mapping[int, Iterable[Future]]) -> Iterator[Future]:
    keys = sorted(parts)
    for combo in itertools.product(*(sorted(parts[t], key=_sort_key) for t in keys)):
        yield Future(frozenset().union(*(f.events for f in combo)), frozenset().union(*(f.order for f in combo)))


def _sort_key(f: Future):
    return (sorted(map(repr, f.events)), sorted(map(repr, f.order)))


def is_up_closed_in(sub: Future, f: Future) -> bool:
    """``sub`` is an up-closed subset of ``f`` carrying ``f``'s order."""
    if not sub.events <= f.events:
        return False
    for a, b in f.order:
        if a in sub.events and b not in sub.events:
            return False
    return sub.order == f.restrict(sub.events).order


def is_subfuture(sub: Iterable[Future] | FutureSet, F: Iterable[Future] | FutureSet) -> bool:
    subs = sub.futures if isinstance(sub, FutureSet) else sub
    fs = list(F.futures if isinstance(F, FutureSet) else F)
    return all(any(is_up_closed_in(s, f) for f in fs) for s in subs)


# ---------------------------------------------------------------------------
# Collapsing event futures to label futures


@dataclass(frozen=True)
class Rejection:
    """Collapse refused: ``witness`` is a future the label form gets wrong."""

    witness: Future
    reason: str

    def __bool__(self) -> bool:
        return False


def collapse_future(f: Future, labels: Mapping[Item, Action]) -> Future:
    m = {g: label_item(labels[g]) for g in f.events}
    return Future(frozenset(m.values()), frozenset((m[a], m[b]) for a, b in f.order))


def expand_label_future(lf: Future, F: FutureSet) -> set[Future]:
    """Event futures whose collapse is ``lf``, built from events of ``F``.

    Chosen events must pairwise occur together in some future of ``F``; the
    order is the one ``F`` imposes on them.
    """
    by_item: dict[LabelItem, list[Item]] = {}
    for g, a in F.labels.items():
        by_item.setdefault(label_item(a), []).append(g)
    together: dict[Item, set[Item]] = {}
    global_order: set[tuple[Item, Item]] = set()
    for f in F.futures:
        for g in f.events:
            together.setdefault(g, set()).update(f.events)
        global_order |= f.order
    items = sorted(lf.events)
    out: set[Future] = set()

    def search(i: int, chosen: list[Item]) -> None:
        if i == len(items):
            evs = frozenset(chosen)
            fut = Future(evs, frozenset(p for p in global_order if p[0] in evs and p[1] in evs))
            if collapse_future(fut, F.labels) == lf:
                out.add(fut)
            return
        for g in by_item.get(items[i], ()):
            if g in together and all(c in together[g] for c in chosen):
                chosen.append(g)
                search(i + 1, chosen)
                chosen.pop()

    search(0, [])
    return out


def collapse_labels(F: FutureSet) -> FutureSet | Rejection:
    """Label-future form of ``F`` if it is faithful, else a :class:`Rejection`.

    Faithful means expanding the label futures back to events regenerates
    exactly ``F``.
    """
    if F.collapsed:
        return F
    lfs = {collapse_future(f, F.labels) for f in F.futures}
    expanded: set[Future] = set()
    for lf in sorted(lfs, key=_sort_key):
        expanded |= expand_label_future(lf, F)
    extra = expanded - F.futures
    if extra:
        w = min(extra, key=_sort_key)
        return Rejection(w, f"label futures also describe {w}, which is not a future")
    missing = F.futures - expanded
    if missing:
        w = min(missing, key=_sort_key)
        return Rejection(w, f"future {w} is lost by collapsing")
    tids = {label_item(F.labels[g]): t for g, t in F.tids.items()}
    return FutureSet(frozenset(lfs), {}, tids, collapsed=True)
