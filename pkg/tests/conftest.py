import random

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# one PASS/FAIL line per acceptance criterion, keyed by test node id
_criteria = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_criteria] = {}


@pytest.fixture
def rng():
    return random.Random(0x5EED)


@pytest.fixture
def criterion(request):
    """``criterion(name, ok, detail)`` records the verdict line and returns ``ok``."""
    lines = request.config.stash[_criteria]

    def emit(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else "")
        lines[request.node.nodeid] = line
        print(line)
        return ok

    return emit


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.get_closest_marker("acceptance"):
        lines = item.config.stash[_criteria]
        if report.failed and not lines.get(item.nodeid, "").startswith("FAIL"):
            lines[item.nodeid] = f"FAIL {item.name} (raised before a verdict)"


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_criteria]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines.values():
            terminalreporter.write_line(line)
