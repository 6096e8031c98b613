import numpy as np
import pytest

from torusflow import PeriodicGrid


@pytest.fixture
def grid64():
    return PeriodicGrid(1, 64)


@pytest.fixture
def grid256():
    return PeriodicGrid(1, 256)


@pytest.fixture
def grid2d():
    return PeriodicGrid(2, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240803)
