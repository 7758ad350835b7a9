import numpy as np
import pytest

from perdyn.model import benchmark_chain


@pytest.fixture(scope="session")
def chain12():
    """Benchmark 12-dof chain at zeta = 0.1 (non-proportional damping)."""
    return benchmark_chain(0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
