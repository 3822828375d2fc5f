import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_CRITERIA = pytest.StashKey[dict]()
_SELECTED = pytest.StashKey[bool]()
N_CRITERIA = 7


def pytest_configure(config):
    config.stash[_CRITERIA] = {}
    config.stash[_SELECTED] = False


def pytest_collection_finish(session):
    session.config.stash[_SELECTED] = any(
        i.module.__name__.endswith("test_acceptance") for i in session.items
    )


@pytest.fixture
def criterion(request):
    """Record an acceptance verdict, then assert it."""
    log = request.config.stash[_CRITERIA]

    def report(number: int, ok: bool, detail: str):
        log[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {number}: {detail}"

    return report


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash[_CRITERIA]
    if not (log or config.stash[_SELECTED]):
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n not in log:
            terminalreporter.write_line(f"criterion {n}: NOT RUN")
            continue
        ok, detail = log[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
