from __future__ import annotations

import io
import json

import pytest
from conftest import PROGRAMS, load

from futurestep.events import (
    DomainError,
    dump_futures,
    expand_executions,
    initial_futures,
    load_futures,
    preserved_ppo,
    syntactic_dependency,
    value_closure,
)
from futurestep.futures import FutureError
from futurestep.lang import parse_program


def closure(src_or_prog, seed=None):
    p = parse_program(src_or_prog) if isinstance(src_or_prog, str) else src_or_prog
    return {x: set(v) for x, v in value_closure(p, seed).items()}


def test_value_closure_load_buffering():
    assert closure(load("lb.prog")) == {"x": {0, 1}, "y": {0, 1, 2}}


def test_value_closure_two_dependencies():
    assert closure(load("lb_two_deps.prog")) == {"x": {0}, "y": {0}}


def test_value_closure_without_writes():
    assert closure("init: x = 0\n1: r1 := [x]") == {"x": {0}}


def test_value_closure_diverges_without_a_seed():
    with pytest.raises(DomainError):
        value_closure(load("rng.prog"))


def test_value_closure_with_seed():
    got = closure(load("rng.prog"), {"x": [0, 1, 2, 99, 100], "y": [0, 1, 2, 3]})
    assert got["x"] >= {0, 1, 2, 99, 100}


def line_sets(p, dom=None):
    dom = dom or value_closure(p)
    _, execs = expand_executions(p, dom)
    return execs


def test_load_buffering_has_six_executions():
    execs = line_sets(load("lb.prog"))
    assert len(execs) == 6
    assert len(list(execs)) == 6


def test_guarded_branch_follows_read_values():
    p = load("partial_cond.prog")
    structure, execs = expand_executions(p, value_closure(p))
    labels = structure.labels
    t2 = [ex for ex in execs.per_thread[2] if ex.reads == {"3": 1, "4": 1}]
    assert len(t2) == 1
    assert {labels[e].line for e in t2[0].events} == {"3", "4", "5", "6"}


def test_write_only_thread_has_one_execution():
    p = parse_program("1: [x] := 1; 2: [y] := 2")
    assert len(line_sets(p)) == 1


def dp_lines(p, tid):
    structure, execs = expand_executions(p, value_closure(p))
    labels = structure.labels
    return {
        frozenset((labels[a].line, labels[b].line) for a, b in ex.dp) for ex in execs.per_thread[tid]
    }


def test_load_buffering_dependencies():
    p = load("lb.prog")
    assert dp_lines(p, 1) == {frozenset({("1", "2")})}
    assert dp_lines(p, 2) == {frozenset()}


def test_two_dependencies():
    p = load("lb_two_deps.prog")
    assert dp_lines(p, 1) == {frozenset({("1", "2")})}
    assert dp_lines(p, 2) == {frozenset({("3", "4")})}


def test_register_copies_chain_the_thread_future():
    p = load("lb_data_ctrl_regs.prog")
    pf = initial_futures(p, value_closure(p))
    labels = pf.labels
    chain = {("1", "2"), ("2", "3"), ("3", "4"), ("4", "5")}
    futs = pf.per_thread[1]
    assert futs
    for f in futs:
        order = {(labels[a].line, labels[b].line) for a, b in f.order}
        assert chain <= order
    # 3 -> 4 is same-variable order, the rest is data flow
    assert all(("3", "4") not in d and {("1", "2"), ("2", "3"), ("4", "5")} <= d for d in dp_lines(p, 1))


def test_syntactic_dependency_matches_stored_dp():
    p = load("lb.prog")
    structure, execs = expand_executions(p, value_closure(p))
    for t, exs in execs.per_thread.items():
        for ex in exs:
            assert syntactic_dependency(ex, exs, structure.labels) == ex.dp


def ppo_lines(src):
    p = parse_program(src)
    structure, execs = expand_executions(p, value_closure(p))
    labels = structure.labels
    return {
        frozenset((labels[a].line, labels[b].line) for a, b in preserved_ppo(ex, labels))
        for ex in execs.per_thread[1]
    }


def test_relaxed_program_keeps_no_order():
    p = load("lb.prog")
    structure, execs = expand_executions(p, value_closure(p))
    assert all(ex.ppo == frozenset() for exs in execs.per_thread.values() for ex in exs)


def test_acquire_orders_later_events():
    assert ppo_lines("1: r := ^A [x]; 2: [y] := 1") == {frozenset({("1", "2")})}


def test_release_orders_earlier_events():
    assert ppo_lines("1: [y] := 1; 2: [x] := ^R 1") == {frozenset({("1", "2")})}


def test_same_variable_accesses_stay_ordered():
    assert ppo_lines("1: [x] := 1; 2: r := [x]") == {frozenset({("1", "2")})}


def test_load_futures_listed_file():
    fs = load_futures(PROGRAMS / "lb.futures.json", load("lb.prog"))
    assert len(fs) == 6
    assert all(len(f.events) == 4 and len(f.order) == 1 for f in fs)


def test_load_futures_empty_list():
    fs = load_futures(io.StringIO('{"events": [], "futures": []}'))
    assert len(fs) == 0


def test_load_futures_rejects_self_loops():
    doc = {
        "events": [{"id": 3, "thread": 1, "label": {"kind": "W", "line": "1", "var": "x", "wval": 1}}],
        "futures": [{"events": [3], "order": [[3, 3]]}],
    }
    with pytest.raises(FutureError, match="cyclic"):
        load_futures(io.StringIO(json.dumps(doc)))


def test_load_futures_checks_lines_against_the_program():
    doc = {
        "events": [{"id": 1, "thread": 1, "label": {"kind": "W", "line": "9", "var": "x", "wval": 1}}],
        "futures": [{"events": [1]}],
    }
    with pytest.raises(FutureError, match="line"):
        load_futures(io.StringIO(json.dumps(doc)), load("lb.prog"))


def test_dump_then_load_round_trips():
    p = load("lb.prog")
    fs = initial_futures(p, value_closure(p)).future_set()
    again = load_futures(io.StringIO(json.dumps(dump_futures(fs))), p)
    assert again.futures == fs.futures
    assert dict(again.labels) == dict(fs.labels)
