from __future__ import annotations

import pytest
from conftest import load

from futurestep.events import initial_futures, value_closure
from futurestep.futures import (
    Future,
    FutureError,
    FutureSet,
    LabelItem,
    available,
    candidate_futures,
    collapse_labels,
    consume,
    event_matcher,
    is_subfuture,
    restrict_to_thread,
)
from futurestep.lang import Action

R1x0 = Action("R", "1", "x", rval=0)
R1x1 = Action("R", "1", "x", rval=1)
W2y1 = Action("W", "2", "y", wval=1)
W2y2 = Action("W", "2", "y", wval=2)
W4x1 = Action("W", "4", "x", wval=1)

LABELS = {
    2: R1x0,
    3: W2y1,
    4: R1x1,
    5: W2y2,
    6: Action("R", "3", "y", rval=0),
    8: Action("R", "3", "y", rval=1),
    10: Action("R", "3", "y", rval=2),
    7: W4x1,
    9: W4x1,
    11: W4x1,
}
TIDS = {e: (1 if e < 6 else 2) for e in LABELS}
MATCH = event_matcher(LABELS)


def lb_set() -> FutureSet:
    futs = {
        Future.build({a, b, c, d}, {(a, b)})
        for a, b in ((2, 3), (4, 5))
        for c, d in ((6, 7), (8, 9), (10, 11))
    }
    return FutureSet(frozenset(futs), LABELS, TIDS)


F_2367 = Future.build({2, 3, 6, 7}, {(2, 3)})


def test_blocked_event_is_unavailable():
    assert not available(W2y1, F_2367, MATCH)


def test_minimal_event_is_available():
    assert available(W4x1, F_2367, MATCH)


def test_nothing_is_available_in_the_empty_future():
    assert not available(W4x1, Future(frozenset()), MATCH)


def test_consume_drops_the_event_and_its_order():
    assert consume(R1x0, F_2367, MATCH) == Future(frozenset({3, 6, 7}))


def test_consume_last_event():
    f = Future(frozenset({7}))
    assert consume(W4x1, f, MATCH) == Future(frozenset())


def test_consume_unavailable_raises():
    with pytest.raises(FutureError):
        consume(W2y1, F_2367, MATCH)


def test_write_four_keeps_all_six():
    after = candidate_futures(W4x1, lb_set())
    assert len(after) == 6
    assert all(not (f.events & {7, 9, 11}) for f in after)
    assert {f.events | ({7, 9, 11} & g.events) for f in after for g in lb_set() if f.events <= g.events} >= {
        g.events for g in lb_set()
    }


def test_reading_zero_keeps_three_futures():
    after = candidate_futures(R1x0, lb_set())
    assert len(after) == 3
    assert all(3 in f.events and 4 not in f.events for f in after)


def test_unused_action_has_no_candidates():
    assert len(candidate_futures(Action("W", "9", "z", wval=0), lb_set())) == 0


def test_restrict_to_thread_one():
    got = restrict_to_thread(lb_set(), 1)
    assert got.futures == {Future.build({2, 3}, {(2, 3)}), Future.build({4, 5}, {(4, 5)})}


def test_restrict_to_absent_thread_is_the_empty_future():
    assert restrict_to_thread(lb_set(), 7).futures == {Future(frozenset())}


def test_subfuture_examples():
    F = [Future.build({1, 2, 3, 4}, {(1, 2)}), Future.build({1, 2, 3}, {(1, 2)})]
    assert is_subfuture([Future(frozenset({2, 4})), Future.build({1, 2}, {(1, 2)})], F)
    assert not is_subfuture([Future(frozenset({1, 3}))], F)
    assert is_subfuture(F, F)


def test_cyclic_order_is_rejected():
    with pytest.raises(FutureError):
        Future.build({1, 2}, {(1, 2), (2, 1)})


def test_collapse_of_load_buffering():
    p = load("lb.prog")
    fs = initial_futures(p, value_closure(p)).future_set()
    res = collapse_labels(fs)
    assert res
    want = {
        Future.build(
            {LabelItem("1", u), LabelItem("2"), LabelItem("3", v), LabelItem("4")},
            {(LabelItem("1", u), LabelItem("2"))},
        )
        for u in (0, 1)
        for v in (0, 1, 2)
    }
    assert res.futures == want


def test_collapse_rejects_unfaithful_sets():
    # 1, 2, 3 meet pairwise but never all together; the label form would allow them jointly
    a = Action("W", "1", "x", wval=1)
    b = Action("W", "2", "y", wval=1)
    c = Action("W", "3", "z", wval=1)
    labels = {1: a, 4: a, 2: b, 5: b, 3: c, 6: c}
    tids = dict.fromkeys(labels, 1)
    futs = {Future(frozenset(s)) for s in ({1, 2, 6}, {1, 5, 3}, {4, 2, 3})}
    res = collapse_labels(FutureSet(frozenset(futs), labels, tids))
    assert not res
    assert res.witness.events == {1, 2, 3}


def test_order_differences_alone_stay_faithful():
    a = Action("W", "1", "x", wval=1)
    b = Action("W", "2", "y", wval=1)
    labels = {1: a, 2: b, 3: a, 4: b}
    futs = {Future.build({1, 2}, {(1, 2)}), Future.build({3, 4}, {(4, 3)})}
    assert collapse_labels(FutureSet(frozenset(futs), labels, dict.fromkeys(labels, 1)))


def test_singleton_set_always_collapses():
    fs = FutureSet(frozenset({Future.build({2, 3}, {(2, 3)})}), {2: R1x0, 3: W2y1}, {2: 1, 3: 1})
    assert collapse_labels(fs)
