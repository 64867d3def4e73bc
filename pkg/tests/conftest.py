import numpy as np
import pytest

from nmloc import LatticeBox, LatticeOperator


def random_banded(box, rng, n_offsets=6, scale=1.0, max_offset=None):
    """Random operator supported on a few random diagonals."""
    m = 2 * box.radius if max_offset is None else int(max_offset)
    mask = np.zeros((box.n_sites, box.n_sites), dtype=bool)
    for _ in range(n_offsets):
        k = rng.integers(-m, m + 1, size=box.dimension)
        mask |= box.pair_offset_flat == box.offset_flat_id(k)
    vals = rng.standard_normal((box.n_sites, box.n_sites)) + 1j * rng.standard_normal(
        (box.n_sites, box.n_sites)
    )
    return LatticeOperator(box, np.where(mask, scale * vals, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def box1d():
    return LatticeBox(1, 8, 6)


@pytest.fixture(scope="session")
def box2d():
    return LatticeBox(2, 3, 2)
