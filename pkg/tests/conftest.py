import sys

import numpy as np
import pytest

from htlstab.data import Dataset
from htlstab.sources import LinearSource


def random_instance(rng, n_max=40, d_max=5, n_min=3, source_scale=0.5):
    """Random labelled sample with a bounded linear source scorer."""
    n = int(rng.integers(n_min, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    x = rng.uniform(-1.0, 1.0, size=(n, d))
    y = rng.choice([-1.0, 1.0], size=n)
    source = LinearSource(rng.uniform(-source_scale, source_scale, size=d))
    return Dataset(x, y), source


def hull_points(rng, x, count):
    """Random convex combinations of the rows of ``x``."""
    weights = rng.dirichlet(np.ones(x.shape[0]), size=count)
    return weights @ x


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
