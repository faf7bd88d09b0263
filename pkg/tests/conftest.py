import contextlib

import numpy as np
import pytest

from hydrant import SyntheticSpec, generate_synthetic

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@contextlib.contextmanager
def criterion(number, title):
    detail = {}
    try:
        yield detail
    except BaseException:
        ACCEPTANCE[number] = (title, False, detail.get("msg", ""))
        raise
    ACCEPTANCE[number] = (title, True, detail.get("msg", ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, msg = ACCEPTANCE[number]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
        terminalreporter.write_line(line + (f"  ({msg})" if msg else ""))


@pytest.fixture
def small_ds():
    return generate_synthetic(
        SyntheticSpec(n=60, d=1, l=32, n_classes=3, kind="sinusoid-frequency", noise=0.2, seed=11)
    )


@pytest.fixture
def multi_ds():
    return generate_synthetic(
        SyntheticSpec(n=40, d=3, l=40, n_classes=2, kind="gaussian-shift", noise=0.3, seed=5)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
