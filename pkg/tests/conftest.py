"""Shared pytest plumbing: the acceptance suite registers one line per
criterion here and the terminal summary replays them after capture ends."""

CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
