import numpy as np
import pytest

from kpplab.field import Field, Grid


@pytest.fixture
def unit_block():
    """``1`` on ``[0, 2]`` at ``dx = 0.01`` inside ``[-6, 6]``."""
    g = Grid(0.01, -6.0, 6.0)
    x = g.x
    vals = np.where((x > -1e-9) & (x < 2 + 1e-9), 1.0, 0.0)
    return Field(g.dx, g.lo, vals)


def block(dx, lo, hi, a, b, level=1.0):
    g = Grid(dx, lo, hi)
    x = g.x
    vals = np.where((x > a - 1e-9) & (x < b + 1e-9), level, 0.0)
    return Field(dx, lo, vals)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
