import pytest

# filled by test_acceptance.report(); echoed after the run so the verdicts
# are visible without -s
VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)


@pytest.fixture
def verdicts():
    return VERDICTS
