from __future__ import annotations

from pathlib import Path

import pytest

from futurestep.lang import parse_program

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def load(name: str):
    return parse_program((PROGRAMS / name).read_text())


@pytest.fixture
def programs_dir() -> Path:
    return PROGRAMS


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
