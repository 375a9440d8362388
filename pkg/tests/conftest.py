import pytest

_LINES = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion and echoes it live."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(line):
        _LINES.append(line)
        if reporter is not None:
            reporter.write_line(line)
        else:
            print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1][1:].rstrip(":"))):
            terminalreporter.write_line(line)
