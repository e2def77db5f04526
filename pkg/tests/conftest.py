import re

ACCEPTANCE_LINES: list[str] = []


def _order(line: str):
    label = line.split()[2].rstrip(":")
    number, suffix = re.match(r"(\d+)(\w*)", label).groups()
    return int(number), suffix


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_order):
            terminalreporter.write_line(line)
