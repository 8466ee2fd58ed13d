import numpy as np
import pytest

from prexpect import corpus
from prexpect.parser import parse_expectation, parse_program
from prexpect.semantics import Expectation, StateSpace, eval_expectation


def space_of(prog, name=None, bindings=None):
    b = corpus.default_bindings(name) if name else {}
    b.update(bindings or {})
    return StateSpace.of(prog, b)


def expect(text, prog, sp):
    return eval_expectation(parse_expectation(text, prog), sp)


@pytest.fixture(scope="session")
def programs():
    return {n: corpus.load(n) for n in corpus.names()}


@pytest.fixture(scope="session")
def spaces(programs):
    return {n: space_of(p, n) for n, p in programs.items()}


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])
