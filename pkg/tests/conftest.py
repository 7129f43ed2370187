from __future__ import annotations

import time

import numpy as np
import pytest

from qsink.functionals import ProblemInstance
from qsink.generate import random_instance
from qsink.sinkhorn import solve

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str):
    """Print and remember one acceptance verdict line, then assert it."""
    line = f"CRITERION {criterion:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def make_instance(seed, dims=None, epsilon=None, hnorm=None) -> ProblemInstance:
    rng = np.random.default_rng(seed)
    if dims is None:
        n = int(rng.integers(2, 4))
        dims = tuple(int(d) for d in rng.integers(2, 4, size=n))
    if epsilon is None:
        epsilon = float(rng.choice([0.5, 1.0, 2.0]))
    if hnorm is None:
        hnorm = float(rng.uniform(0.5, 2.0))
    raw = random_instance(dims, epsilon, hnorm, rng)
    return ProblemInstance.create(raw["marginals"], raw["hamiltonian"], epsilon)


CORPUS_SIZE = 50


def corpus_instance(k: int) -> ProblemInstance:
    """Seeded random instance k of the shared certification corpus (total dimension <= 27)."""
    rng = np.random.default_rng(7000 + k)
    n = int(rng.integers(2, 4))
    dims = tuple(int(d) for d in rng.integers(2, 4, size=n))
    epsilon = (0.5, 1.0, 2.0)[k % 3]
    hnorm = float(rng.uniform(0.5, 2.0))
    raw = random_instance(dims, epsilon, hnorm, rng)
    return ProblemInstance.create(raw["marginals"], raw["hamiltonian"], epsilon)


@pytest.fixture(scope="session")
def corpus():
    """``(instances, reports, total_seconds)`` for the 50-instance corpus, solved once per session."""
    instances = [corpus_instance(k) for k in range(CORPUS_SIZE)]
    start = time.perf_counter()
    reports = [solve(inst) for inst in instances]
    elapsed = time.perf_counter() - start
    return instances, reports, elapsed
