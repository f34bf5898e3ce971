from __future__ import annotations

import math

import numpy as np
import pytest

from fracpp.experiments import benchmark_grading, benchmark_spec
from fracpp.specfun import TimeMesh


@pytest.fixture(scope="session")
def bench():
    return benchmark_spec()


@pytest.fixture(scope="session")
def bench_inverse_spec():
    return benchmark_spec(with_source=False)


@pytest.fixture(scope="session")
def bench_mesh():
    return TimeMesh(5.0, 100, benchmark_grading())


def max_rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


SQRT2 = math.sqrt(2)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
