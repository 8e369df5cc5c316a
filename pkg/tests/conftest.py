import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# verdict lines recorded by tests/test_acceptance.py; shown after the run
# so they survive output capture in plain `pytest -v`
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
