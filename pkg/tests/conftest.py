"""Общие фикстуры тестов torus-lab."""
import numpy as np  # type: ignore
import pytest

from App.grid_core import GridPerm
from App.shuffle_engine import ShuffleStream
from App.trial_runner import TrialRunner

FIGURE_LEFT = [[1, 4, 9, 16], [2, 3, 8, 15], [5, 6, 7, 14], [10, 11, 12, 13]]


@pytest.fixture
def figure_grid() -> GridPerm:
    """Сетка n=4 с метками, записанная строками сверху вниз."""
    return GridPerm.from_rows(FIGURE_LEFT)


@pytest.fixture
def stream_factory():
    def make(index: int = 0, seed: int = 12345) -> ShuffleStream:
        return ShuffleStream(seed, index)
    return make


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def runner():
    with TrialRunner(threads=1, batch_size=500) as r:
        yield r
