import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from botlens.synth import GeneratorConfig, generate  # noqa: E402


@pytest.fixture(scope="session")
def small_binary():
    return generate(GeneratorConfig(n=800, seed=3, collapse_heavy=True))


@pytest.fixture(scope="session")
def small_three():
    return generate(GeneratorConfig(n=800, seed=3))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, summary): acceptance criterion a test checks")
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, summary = mark.args
    # any failing phase (setup, call, teardown) fails the criterion
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    prev = item.config._criteria.get(number, (summary, True))
    item.config._criteria[number] = (summary, prev[1] and not failed)


def pytest_terminal_summary(terminalreporter, config):
    criteria = getattr(config, "_criteria", {})
    if not criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(criteria):
        summary, ok = criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {summary}")
