import json
from pathlib import Path

import pytest

GOLDEN = Path(__file__).with_name("golden.json")


@pytest.fixture(scope="session")
def golden():
    return json.loads(GOLDEN.read_text())


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
