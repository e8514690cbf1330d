import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from choquard_lab import ComplexField, make_grid

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

GOLDEN = json.loads((Path(__file__).parent / "golden.json").read_text())

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def golden():
    return GOLDEN


def smooth_field(grid, rng, width=1.5, complex_=True, noise=0.2):
    """Gaussian bump at a random offset times a smooth random modulation."""
    xs = grid.mesh()
    c = rng.uniform(-0.5, 0.5, size=grid.dim)
    r2 = sum((x - ci) ** 2 for x, ci in zip(xs, c))
    base = np.exp(-r2 / (2 * width**2))
    k = 2 * np.pi / grid.box_length
    mod = 1.0 + noise * sum(np.cos(k * x + rng.uniform(0, 6.3)) for x in xs)
    v = base * mod
    if complex_:
        v = v * np.exp(1j * sum(rng.uniform(-1, 1) * np.sin(k * x) for x in xs))
    return ComplexField(grid, v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def grid16():
    return make_grid(3, 16, 8.0)
