import pytest
from hypothesis import HealthCheck, settings

from helpers import GENERIC, NO_ROOTS, REFERENCE

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.filter_too_much]
)
settings.load_profile("default")

VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[VERDICTS] = {}


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(VERDICTS, {})
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for n in sorted(verdicts):
            terminalreporter.write_line(verdicts[n])


@pytest.fixture
def verdict(request):
    """Record and print the one-line outcome of an acceptance criterion."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        request.config.stash[VERDICTS][n] = line
        print(line)
        return ok

    return record


@pytest.fixture
def reference():
    return REFERENCE


@pytest.fixture
def generic():
    return GENERIC


@pytest.fixture
def no_roots():
    return NO_ROOTS
