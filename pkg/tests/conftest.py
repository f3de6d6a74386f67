import pytest

_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def criteria(request):
    """Session-wide ``{criterion number: (passed, detail)}`` filled by the acceptance tests."""
    return request.config.stash.setdefault(_KEY, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
