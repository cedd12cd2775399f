import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        key = lambda s: int(s.split("[")[1].split("]")[0])  # noqa: E731
        for line in sorted(acceptance_log.LINES, key=key):
            terminalreporter.write_line(line)
