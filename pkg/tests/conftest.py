import functools

import pytest

from nhtlab.gridquant import make_grid
from nhtlab.model1d import ChiProfile, assemble_witness
from nhtlab.spectral import bundle_spectrum, resonance_ladder

SWEEP = (0.05, 0.02, 0.01)


@functools.lru_cache(maxsize=None)
def profile():
    return ChiProfile()


@functools.lru_cache(maxsize=None)
def bundle(h: float, margin: float = 1.0):
    return assemble_witness(make_grid(h, margin), profile())


@functools.lru_cache(maxsize=None)
def report(h: float, margin: float = 1.0):
    b = bundle(h, margin)
    return resonance_ladder(b, spectrum=bundle_spectrum(b))


@pytest.fixture(scope="session")
def get_bundle():
    return bundle


@pytest.fixture(scope="session")
def get_report():
    return report


@pytest.fixture(scope="session")
def chi_profile():
    return profile()


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
