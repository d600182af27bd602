from __future__ import annotations

import sys
from pathlib import Path

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).resolve().parent))

import oracle  # noqa: E402
import props  # noqa: E402

from futurestep.executor import explore  # noqa: E402
from futurestep.lang import parse_program  # noqa: E402

SUITE = settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def programs(draw):
    return props.program_text(lambda opts: draw(st.sampled_from(list(opts))))


def graphs_of(src):
    ex, space = props.explore_space(src)
    return ex, space, [c.graph for c in space.states.values()]


@SUITE
@given(programs())
def test_mo_is_total_per_variable(src):
    for g in graphs_of(src)[2]:
        props.check_mo_total(g)


@SUITE
@given(programs())
def test_reads_agree_with_their_source(src):
    for g in graphs_of(src)[2]:
        props.check_rf_agreement(g)


@SUITE
@given(programs())
def test_hb_is_acyclic(src):
    for g in graphs_of(src)[2]:
        props.check_hb_acyclic(g)


@SUITE
@given(programs())
def test_encountered_writes_only_grow(src):
    ex, space, _ = graphs_of(src)
    for c in space.states.values():
        for _, d in ex.successors(c):
            props.check_ew_monotone(c.graph, d.graph, ex.tids)


@SUITE
@given(programs())
def test_updates_are_atomic(src):
    for g in graphs_of(src)[2]:
        props.check_update_atomic(g)


@SUITE
@given(programs())
def test_last_write_is_observable_everywhere(src):
    ex, _, gs = graphs_of(src)
    for g in gs:
        props.check_mo_max_observable(g, ex.tids)


@SUITE
@given(programs())
def test_incremental_relations_match_naive(src):
    ex, _, gs = graphs_of(src)
    for g in gs:
        props.check_incremental(g, ex.tids)


# -- explorer against the axiomatic reference ---------------------------------


@st.composite
def relaxed_programs(draw):
    """Straight-line relaxed loads, stores and copies, within the reference's fragment."""
    nthreads = draw(st.integers(1, 3))
    total = draw(st.integers(1, 6))
    owner = [draw(st.integers(0, nthreads - 1)) for _ in range(total)]
    label = 1
    parts = []
    for t in range(nthreads):
        regs: list[str] = []
        stmts = []
        for _ in range(owner.count(t)):
            var = draw(st.sampled_from("xy"))
            kind = draw(st.sampled_from(["load", "store", "copy"] if regs else ["load", "store"]))
            if kind == "load":
                stmts.append(f"{label}: r{label} := [{var}]")
                regs.append(f"r{label}")
            elif kind == "store":
                val = draw(st.sampled_from(["0", "1", "2", *regs]))
                stmts.append(f"{label}: [{var}] := {val}")
            else:
                stmts.append(f"{label}: r{label} := {draw(st.sampled_from(regs))}")
                regs.append(f"r{label}")
            label += 1
        parts.append(";\n".join(stmts) if stmts else "skip")
    return "init: x = 0, y = 0\n" + "\n|||\n".join(parts)


@SUITE
@given(relaxed_programs())
def test_outcomes_match_axiomatic_reference(src):
    p = parse_program(src)
    res = explore(p)
    assert not res.stuck
    assert {(o.registers, o.memory) for o in res.outcomes} == oracle.outcomes(p)
