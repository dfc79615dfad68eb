import warnings

import numpy as np
import pytest

from wavepax import dispersion as dsp
from wavepax.grids import Grid

warnings.filterwarnings("ignore", message="contraction heuristic")


@pytest.fixture
def nls_model():
    """Single symmetric band omega = k^2 + 1 (no singular points)."""
    return dsp.model_from_config({"preset": "nls1d", "params": {"a2": 1.0, "a0": 1.0}})


@pytest.fixture
def shg_model():
    """omega = k^2 + 2 gives exact second harmonic generation at k* = 1."""
    return dsp.model_from_config({"preset": "nls1d", "params": {"a2": 1.0, "a0": 2.0}})


@pytest.fixture
def thg_model():
    """omega = |k|^3 + 12 gives exact third harmonic generation at k* = 1.

    A quadratic band cannot carry a clean third-harmonic set: on a parabola
    the relation 3w(k) = w(3k) forces 2w(3k) + w(k) = w(5k) as well.
    """
    return dsp.model_from_config({"preset": "power", "params": {"p": 3.0, "a0": 12.0}})


@pytest.fixture
def grid512():
    return Grid(1, (512,), (4.0,))


@pytest.fixture
def grid256():
    return Grid(1, (256,), (4.0,))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
