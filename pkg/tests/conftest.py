import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def principal_sines(q1, q2):
    """Largest sine of the principal angles between two orthonormal bases."""
    return float(np.linalg.norm(q2 - q1 @ (q1.T @ q2), 2))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
