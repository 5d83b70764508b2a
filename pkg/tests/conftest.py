import numpy as np
import pytest

from fsdr import Grid
from fsdr.dcov import warm_up_jit


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    warm_up_jit()


@pytest.fixture(scope="session")
def grid100() -> Grid:
    return Grid.uniform(100)


@pytest.fixture(scope="session")
def bm_eigenpairs(grid100):
    """Analytic Karhunen-Loeve pairs of standard Brownian motion."""
    t = grid100.points
    lam = np.array([1.0 / (((k - 0.5) * np.pi) ** 2) for k in range(1, 11)])
    phi = np.column_stack(
        [np.sqrt(2.0) * np.sin((k - 0.5) * np.pi * t) for k in range(1, 11)]
    )
    return lam, phi
