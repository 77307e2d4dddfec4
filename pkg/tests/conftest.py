import math

import numpy as np
import pytest
from hypothesis import settings

from pertevol import models

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects one summary line per acceptance criterion."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def trap():
    """Resonant linearized ion trap (delta = nu), moderate Lamb-Dicke parameter."""
    return models.linearized_params(nu=1.0, epsilon=3.0, alpha=2.0, lam=0.05, eta=0.3, cutoff=12)


@pytest.fixture(scope="session")
def trap_chain(trap):
    return models.interaction_chain(trap)


@pytest.fixture(scope="session")
def period(trap):
    return 2 * math.pi / trap.nu


def random_hermitian(rng, dim, scale=1.0):
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (x + x.conj().T)
