import numpy as np
import pytest

FIXTURE_DIR = __file__.rsplit("/", 1)[0] + "/fixtures"


@pytest.fixture
def rng():
    return np.random.default_rng(0xA5A5)


@pytest.fixture
def clock():
    from aecnet import dsp
    return dsp.AudioClock()


@pytest.fixture
def layout(clock):
    from aecnet import dsp
    return dsp.default_band_layout(clock)
