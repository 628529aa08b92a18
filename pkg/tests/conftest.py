ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    # acceptance verdicts are collected by tests/test_acceptance.py; echo
    # them after the run so they survive output capturing
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
