import time

import pytest

from gcbatch.cli import run_pipeline
from gcbatch.config import ExperimentConfig

# criterion number -> (title, passed, detail); printed in the terminal summary
ACCEPTANCE = {}


def record(num, title, passed, detail):
    ACCEPTANCE[num] = (title, bool(passed), detail)
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {title} :: {detail}"
    print(line)
    return passed


class _Run:
    def __init__(self, root, seconds):
        self.root = root
        self.seconds = seconds


_RUNS = {}


def _pipeline(factory, name):
    if name not in _RUNS:
        root = factory.mktemp(f"pipeline_{name}")
        t0 = time.perf_counter()
        run_pipeline(ExperimentConfig(), root)
        _RUNS[name] = _Run(root, time.perf_counter() - t0)
    return _RUNS[name]


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """The full default pipeline (both envs, four methods), run once per session."""
    return _pipeline(tmp_path_factory, "a")


@pytest.fixture(scope="session")
def default_rerun(tmp_path_factory, default_run):
    return _pipeline(tmp_path_factory, "b")


def pytest_collection_modifyitems(items):
    for item in items:
        if {"default_run", "default_rerun"} & set(getattr(item, "fixturenames", ())):
            item.add_marker(pytest.mark.slow)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title} :: {detail}")
