import numpy as np
import pytest
from hypothesis import settings, strategies as st

from omnisim.links import PiecewiseLinearLink

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_link(rng, lr=1.0, n_knots=None, strict=False, full_range=False):
    """Monotone piecewise-linear link on [-lr, lr] with random knots."""
    k = int(rng.integers(2, 9)) if n_knots is None else n_knots
    inner = np.sort(rng.uniform(-lr, lr, size=k - 2))
    t = np.concatenate([[-lr], inner, [lr]])
    t = np.unique(t)
    if strict:
        v = np.sort(rng.uniform(0, 1, size=t.size))
        v += np.linspace(0, 1e-3, t.size)
        v = (v - v.min()) / (v.max() - v.min())
        if not full_range:
            v = 0.05 + 0.9 * v
    else:
        v = np.sort(rng.uniform(0, 1, size=t.size))
        if full_range:
            v[0], v[-1] = 0.0, 1.0
    return PiecewiseLinearLink(t, v, lr=lr)


@st.composite
def links(draw, strict=False, full_range=False):
    seed = draw(st.integers(0, 2**32 - 1))
    lr = draw(st.sampled_from([0.5, 1.0, 2.0, 3.0]))
    return random_link(np.random.default_rng(seed), lr=lr, strict=strict, full_range=full_range)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
