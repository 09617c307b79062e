import sys
from pathlib import Path

import pytest

from chorver.parser import parse_program, parse_spec, parse_state

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def load(name: str):
    return (CORPUS / name).read_text()


@pytest.fixture(scope="session")
def dh():
    prog = parse_program(load("dh.chor"))
    return prog, parse_state(load("dh.state"), prog.processes), parse_spec(load("dh.spec"), prog)


@pytest.fixture(scope="session")
def zeros():
    prog = parse_program(load("zeros.chor"))
    return prog, parse_state(load("zeros.state"), prog.processes), parse_spec(load("zeros.spec"), prog)


@pytest.fixture(scope="session")
def broken(dh):
    prog = dh[0]
    return prog, parse_spec(load("broken.spec"), prog)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
