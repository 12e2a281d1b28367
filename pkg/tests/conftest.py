import numpy as np
import pytest

from maxheat.data_types import PhysicalConstants
from maxheat.domain import ANNULUS, RECTANGLE, build_domain


@pytest.fixture
def unit_square():
    return build_domain(RECTANGLE, 16)


@pytest.fixture
def annulus():
    return build_domain(ANNULUS, 32)


@pytest.fixture
def consts():
    return PhysicalConstants()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def cavity_mode():
    """Lowest cavity mode sin(pi x) sin(pi y) on a rectangle, masked."""

    def build(dom):
        X, Y = dom.coordinates()
        return dom.apply_mask(np.sin(np.pi * X / dom.width) * np.sin(np.pi * Y / dom.height))

    return build
