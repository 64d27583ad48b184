import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from corrtensor import prob

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def distributions(draw, cards=None, min_k=2, max_k=3, max_card=3, min_mass=0.0):
    """Random JointDistribution from a seed and Dirichlet weights."""
    if cards is None:
        k = draw(st.integers(min_k, max_k))
        cards = [draw(st.integers(2, max_card)) for _ in range(k)]
    seed = draw(st.integers(0, 2**32 - 1))
    r = np.random.default_rng(seed)
    v = r.dirichlet(np.ones(int(np.prod(cards))))
    v = (v + min_mass) / (1 + min_mass * v.size)
    return prob.JointDistribution(v.reshape(cards))


@st.composite
def channels(draw, n_in, n_out=None):
    n_out = n_in if n_out is None else n_out
    seed = draw(st.integers(0, 2**32 - 1))
    return prob.random_channel(np.random.default_rng(seed), n_in, n_out)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"AC{number:02d} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
