"""Future-based operational semantics for weak memory, with an explorer and
an Owicki-Gries proof checker."""

from __future__ import annotations

from .assertions import eval_assertion, parse_assertion
from .events import initial_futures, load_futures, dump_futures
from .executor import Explorer, Options, explore, replay_trace
from .kernels import backend
from .lang import parse_program
from .memory import Graph, build_graph, views_report
from .proofcheck import check_og, load_outline

__all__ = [
    "Explorer",
    "Graph",
    "Options",
    "backend",
    "build_graph",
    "check_og",
    "dump_futures",
    "eval_assertion",
    "explore",
    "initial_futures",
    "load_futures",
    "load_outline",
    "parse_assertion",
    "parse_program",
    "replay_trace",
    "views_report",
]
__version__ = "0.1.0"
