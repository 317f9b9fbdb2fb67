import numpy as np
import pytest
from hypothesis import settings

from subaoa import circular_array, select_band, stft, synthesize

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def mics6():
    return circular_array(6, 0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def analysis(sc, array, band=(300.0, 4000.0)):
    """Simulated recording turned into the default analysis tensor."""
    return select_band(stft(synthesize(sc, array)), band)


def random_hermitian(rng, d, scale=1.0):
    A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * (A + A.conj().T) / 2


def random_unit(rng, d):
    a = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return a / np.linalg.norm(a)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
