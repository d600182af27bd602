from __future__ import annotations

import pytest
from conftest import load

from futurestep.lang import (
    Action,
    BinOp,
    Const,
    If,
    Load,
    ParseError,
    Reg,
    Seq,
    Skip,
    Store,
    While,
    atomic_set,
    eval_expr,
    parse_program,
    unroll,
)


def labels(cmds):
    return {c.label for c in cmds}


def test_two_threads_on_one_line():
    p = parse_program("1: r1 := [x] ||| 2: [x] := 1")
    assert p.tids == (1, 2)
    assert isinstance(p.threads[1], Load)
    assert isinstance(p.threads[2], Store)


def test_load_buffering_program_shape():
    p = load("lb.prog")
    assert labels(atomic_set(p)[1]) == {"1", "2"}
    assert labels(atomic_set(p)[2]) == {"3", "4"}
    assert p.init == {"x": 0, "y": 0}
    assert [c.label for c in p.threads[1].items] == ["1", "2"]


def test_duplicate_label_is_rejected():
    with pytest.raises(ParseError, match="duplicate label"):
        parse_program("1: [x] := 1; 1: [y] := 1")


def test_parse_errors_carry_a_position():
    with pytest.raises(ParseError) as info:
        parse_program("1: r1 := [x")
    assert info.value.line == 1


def test_annotations_and_updates():
    p = parse_program("1: r1 := ^A [x]; 2: [y] := ^R 1; 3: upd^RA([z], 0, r1)")
    a, b, c = p.threads[1].items
    assert a.acquire and b.release
    assert c.var == "z"


@pytest.mark.parametrize(
    "expr, regs, want",
    [
        (BinOp("+", Reg("r1"), Const(1)), {"r1": 1}, 2),
        (Reg("r1"), {"r1": 0}, 0),
    ],
)
def test_eval_arithmetic(expr, regs, want):
    assert eval_expr(expr, regs) == want


def test_eval_guard_conjunction():
    p = load("partial_cond.prog")
    guard = next(c for c in p.threads[2].items if isinstance(c, If)).guard
    assert eval_expr(guard, {"r1": 1, "r2": 0}) is False
    assert eval_expr(guard, {"r1": 1, "r2": 1}) is True


def test_unroll_depth_zero_is_skip():
    p = parse_program("while r1 = 0 do { 5: r1 := [x] }")
    assert unroll(p, 0).threads[1] == Skip()


def test_unroll_depth_two_relabels_iterations():
    p = parse_program("while r1 = 0 do { 5: [x] := 1 }")
    got = unroll(p, 2).threads[1]
    assert isinstance(got, If)
    first = got.then
    if isinstance(first, Seq):
        first, inner = first.items
    else:
        inner = None
    assert first.label == "5.1"
    assert isinstance(inner, If) and inner.then.label == "5.2"
    assert inner.orelse == Skip()


def test_unroll_leaves_loop_free_programs_alone():
    p = load("lb.prog")
    assert unroll(p, 3) is p


def test_atomic_set_of_skip_thread_is_empty():
    assert atomic_set(parse_program("skip ||| 1: [x] := 1"))[1] == frozenset()


def test_atomic_set_flattens_conditionals():
    assert labels(atomic_set(load("partial_cond.prog"))[2]) == {"3", "4", "5", "6", "7", "8"}


def test_atomic_set_refuses_loops():
    with pytest.raises(ValueError):
        atomic_set(parse_program("while 1 = 1 do { 1: [x] := 1 }"))


def test_action_short_names():
    assert Action("W", "2", "y", wval=1).short() == "W2y1"
    assert Action("R", "1", "x", rval=0).short() == "R1x0"


def test_while_node_is_kept_before_unrolling():
    p = parse_program("while r1 = 0 do { 1: r1 := [x] }")
    assert isinstance(p.threads[1], While)
    assert p.has_loops()
