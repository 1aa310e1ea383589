import numpy as np
import pytest


def fd_grad(fn, arr, h=1e-6):
    """Central finite-difference gradient of scalar fn() w.r.t. array arr (in place)."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        up = fn()
        arr[i] = old - h
        down = fn()
        arr[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_err(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), floor))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one "criterion N: PASS/FAIL ..." line per acceptance criterion, printed
# at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
