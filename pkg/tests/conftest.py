import os
from functools import lru_cache
from importlib import resources

import pytest

from nullgeo.deffile import load

_RESULTS_KEY = pytest.StashKey[list]()


def data_path(name):
    return str(resources.files("nullgeo") / "data" / name)


@lru_cache(maxsize=None)
def definition(name):
    """Parsed bundled definition; cached because charts memoise point data."""
    return load(data_path(name))


@pytest.fixture
def cone():
    return definition("lightcone.def")


@pytest.fixture
def cone4():
    return definition("cone4.def")


def pytest_configure(config):
    config.stash[_RESULTS_KEY] = []


@pytest.fixture
def record_criterion(request):
    """Collects one ``(number, passed, detail)`` line per acceptance criterion."""
    results = request.config.stash[_RESULTS_KEY]

    def record(number, passed, detail):
        results.append((number, bool(passed), detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS_KEY, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(results, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _single_thread(monkeypatch):
    # CLI tests compare bytes; pin the pool size unless a test overrides it
    monkeypatch.setenv("NULLGEO_THREADS", os.environ.get("NULLGEO_TEST_THREADS", "1"))
