import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eqstop.diffusion import constant_model  # noqa: E402
from eqstop.discounting import hyperbolic_measure  # noqa: E402
from eqstop.rewards import Piece, affine, make_reward  # noqa: E402
from eqstop.stability_lab import TwoBarrierParams, make_grid, two_barrier_reward  # noqa: E402


@pytest.fixture(scope="session")
def bm():
    return constant_model(0.0, 1.0)


@pytest.fixture(scope="session")
def hyp1():
    return hyperbolic_measure(1.0, 64)


@pytest.fixture(scope="session")
def unit_reward():
    return make_reward([Piece(-math.inf, math.inf, affine(0.0, 1.0), "affine")], probe=np.linspace(-10, 10, 21))


@pytest.fixture(scope="session")
def two_barrier(hyp1):
    p = TwoBarrierParams()
    f, k = two_barrier_reward(p, hyp1)
    return p, f, k


@pytest.fixture(scope="session")
def grid41():
    return make_grid(-3.0, 4.0, 1 / 64, pins=(0.0, 1.0))


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = getattr(request.config, "acceptance_lines", None)
    if lines is None:
        lines = request.config.acceptance_lines = []
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
