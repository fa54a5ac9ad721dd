import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=30, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=100, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def ladder_matrix(n_max):
    """Truncated annihilation operator, built independently of the library."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def word_matrix(word, cutoffs):
    """Dense product of elementary ladder matrices for a (mode, is_creation) word."""
    dims = [c + 1 for c in cutoffs]
    out = np.eye(int(np.prod(dims)))
    for mode, creation in word:
        a = ladder_matrix(cutoffs[mode])
        op = a.T if creation else a
        mats = [np.eye(d) for d in dims]
        mats[mode] = op
        full = mats[0]
        for m in mats[1:]:
            full = np.kron(full, m)
        out = out @ full
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def record_criterion(number, title, ok, detail):
    """Store a one-line verdict for the acceptance summary and return ``ok``."""
    ACCEPTANCE[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    print(ACCEPTANCE[number])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
