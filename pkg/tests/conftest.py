import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def stand_task():
    from horizon_bench.tasks.task import make_task

    return make_task("stand", "ours")


@pytest.fixture(scope="session")
def walk_task():
    from horizon_bench.tasks.task import make_task

    return make_task("walk", "ours")


@pytest.fixture(scope="session")
def push_task():
    from horizon_bench.tasks.task import make_task

    return make_task("push", "ours")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance verdicts -----------------------------------------------------------

VERDICTS: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        why = self.detail if exc_type is None else f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        line = f"criterion {self.number:2d} {status}  {self.title}" + (f"  [{why}]" if why else "")
        VERDICTS[self.number] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c: ...`` records a pass/fail line for criterion n."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
