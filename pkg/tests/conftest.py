import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from medpc import DgpSpec, NuisanceAt

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")

prob = st.floats(min_value=0.01, max_value=0.99, allow_nan=False)


@st.composite
def monotone_nuisance(draw):
    """Nuisances generated by a monotone coupling, as the identification assumes."""
    g0, g1t, m00, m01, m10t, m11t = (draw(prob) for _ in range(6))
    pi = draw(prob)
    g1 = g1t * (1 - g0) + g0
    m10 = m10t * (1 - m00) + m00
    q = (1 - m01) * (1 - m10t) * (1 - m00)
    m11 = m11t * q + 1 - q
    return NuisanceAt(pi=pi, gamma0=g0, gamma1=g1, mu00=m00, mu01=m01, mu10=m10, mu11=m11)


def random_monotone(rng, size):
    """Vectorised counterpart of :func:`monotone_nuisance`."""
    u = rng.uniform(0.01, 0.99, size=(7, size))
    pi, g0, g1t, m00, m01, m10t, m11t = u
    q = (1 - m01) * (1 - m10t) * (1 - m00)
    return NuisanceAt(pi=pi, gamma0=g0, gamma1=g1t * (1 - g0) + g0, mu00=m00, mu01=m01,
                      mu10=m10t * (1 - m00) + m00, mu11=m11t * q + 1 - q)


@pytest.fixture(scope="session")
def spec():
    return DgpSpec()


@pytest.fixture(scope="session")
def grid21():
    return np.linspace(0.0, 1.0, 21)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
