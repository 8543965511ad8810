import numpy as np
import pytest

ACCEPTANCE_LINES = []


def random_stiefel(rng, m, ell):
    q, r = np.linalg.qr(rng.standard_normal((m, ell)))
    return q * np.sign(np.diag(r))


def random_tangent(rng, q):
    """Unit-norm horizontal tangent vector at ``q`` (Q^T V = 0)."""
    v = rng.standard_normal(q.shape)
    v -= q @ (q.T @ v)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
