import numpy as np
import pytest

from sync_landscape.operators import StiefelTuple, polar_factor

ACCEPTANCE_LINES: list[str] = []


def random_tuple(rng, n, d, p, spread=1.0):
    """Stiefel tuple scattered around a common block; small ``spread`` means nearly aligned."""
    center = polar_factor(rng.standard_normal((d, p)))
    return StiefelTuple(np.stack([polar_factor(center + spread * rng.standard_normal((d, p))) for _ in range(n)]))


def random_tangent(rng, S):
    y = rng.standard_normal(S.blocks.shape)
    lam = np.einsum("nap,nbp->nab", y, S.blocks)
    return y - 0.5 * (lam + lam.transpose(0, 2, 1)) @ S.blocks


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
