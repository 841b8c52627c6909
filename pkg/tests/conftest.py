from pathlib import Path

import pytest

from chasebag.textio import parse_program, parse_query

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

_criteria = []


@pytest.fixture
def load():
    """Parse an inline program and (optionally) a query against it."""

    def _load(program_text, query_text=None):
        program = parse_program(program_text)
        if query_text is None:
            return program
        return program, parse_query(query_text, program.schema)

    return _load


@pytest.fixture
def criterion():
    """Record an acceptance line; printed in the terminal summary."""

    def _record(number, passed, detail):
        _criteria.append((number, passed, detail))
        print(f"[criterion {number}] {'PASS' if passed else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_criteria, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
