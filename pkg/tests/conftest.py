import os

import numpy as np
import pytest
from hypothesis import settings

# the first call into the compiled kernels may trigger a (cached) compile
settings.register_profile("default", deadline=None, max_examples=100)
settings.register_profile("ci", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: tests/test_acceptance.py records one line per criterion
ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Call ``criterion(n, ok, detail)`` to record the verdict for criterion ``n``."""
    def record(n, ok, detail=""):
        request.config.stash[ACCEPTANCE][n] = (bool(ok), detail)
        print(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
