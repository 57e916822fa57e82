import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from mod2t.core import BoundingBox

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


coord = st.floats(-500, 500, allow_nan=False, allow_infinity=False)
extent = st.floats(0.5, 300, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw):
    return BoundingBox(draw(coord), draw(coord), draw(extent), draw(extent))


def random_box(rng, lo=-200, hi=200, wmin=1.0, wmax=120.0):
    return BoundingBox(float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)),
                       float(rng.uniform(wmin, wmax)), float(rng.uniform(wmin, wmax)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def texture():
    from mod2t.synth import value_noise
    return np.clip(value_noise((240, 320), seed=7, contrast=50), 0, 255)
