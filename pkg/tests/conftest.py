import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

ACCEPTANCE_COUNT = 9
_LOG_KEY = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Dict criterion -> (passed, detail), shown in the terminal summary."""
    return request.config.stash.setdefault(_LOG_KEY, {})


@pytest.fixture
def record_criterion(acceptance_log):
    def record(number: int, passed: bool, detail: str) -> bool:
        acceptance_log[number] = (bool(passed), detail)
        print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_LOG_KEY, None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, ACCEPTANCE_COUNT + 1):
        if k in log:
            passed, detail = log[k]
            terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {k}: {detail}")
        else:
            terminalreporter.write_line(f"---- criterion {k}: no result (not selected or did not finish)")
