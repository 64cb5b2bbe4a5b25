import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from biphoton.qutrit import normalize

settings.register_profile(
    "default", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)


@st.composite
def complex_vectors(draw, n=3):
    re = draw(st.lists(finite, min_size=n, max_size=n))
    im = draw(st.lists(finite, min_size=n, max_size=n))
    v = np.array(re) + 1j * np.array(im)
    if np.linalg.norm(v) < 1e-3:
        v = v + np.eye(n)[0]
    return v


@st.composite
def qutrits(draw):
    return normalize(draw(complex_vectors(3)))


@st.composite
def density_matrices(draw):
    """Random physical density matrices as normalized G G^+."""
    g = np.array([draw(complex_vectors(3)) for _ in range(3)])
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
