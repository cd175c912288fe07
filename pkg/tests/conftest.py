import pytest

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request, capsys):
    """Record one pass/fail line per acceptance criterion; lines are echoed live and in the summary."""
    lines = request.config.stash[_ACCEPTANCE]

    def log(number, title, ok, detail, elapsed, limit):
        within = elapsed < limit
        verdict = "PASS" if ok and within else "FAIL"
        line = f"A{number:<2} {verdict}  {title}: {detail}  [{elapsed:.1f}s, limit {limit}s]"
        lines.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        return ok and within

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
