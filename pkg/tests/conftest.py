import time

import numpy as np
import pytest

from lfinr.lightfield import LightField
from lfinr.pipeline import encode_lightfield, load_preset
from lfinr.synth import synth_lightfield

# Acceptance outcomes, filled in by tests/test_acceptance.py: name -> (passed, detail).
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[name] = (bool(passed), detail)
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")


@pytest.fixture(scope="session")
def desk() -> LightField:
    """The 3x3 x 24x32 synthetic desk scene used by the end-to-end checks."""
    return synth_lightfield(seed=0)


@pytest.fixture(scope="session")
def tiny_encode(desk):
    """Full tiny-preset encode of the desk scene with seed 0 (shared, expensive)."""
    t0 = time.perf_counter()
    res = encode_lightfield(desk, load_preset("tiny"), seed=0)
    res.timings["total"] = time.perf_counter() - t0
    return res


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (passed, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
