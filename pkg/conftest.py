"""
Shared fixtures for the besovflow test suites
"""
import numpy as np
import pytest

from services.grid import Field, Grid
from services.synth import RoughFieldSpec, generate, taylor_green


@pytest.fixture
def grid16():
    return Grid((16, 16))


@pytest.fixture
def grid32():
    return Grid((32, 32))


@pytest.fixture
def grid64():
    return Grid((64, 64))


@pytest.fixture
def taylor_green32(grid32):
    return taylor_green(grid32)


@pytest.fixture
def smooth_velocity32(grid32):
    """Divergence-free random field on the |k| < 2 shell, amplitude 0.1"""
    return generate(RoughFieldSpec(0.5, 'power-spectrum', 0, 7, True, 0.1), grid32)


@pytest.fixture
def cosine_x(grid32):
    """Scalar cos(2πx)"""
    return Field.from_function(grid32, lambda x, y: np.cos(2 * np.pi * x))
