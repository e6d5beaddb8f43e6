import numpy as np
import pytest

from qergodic import rng as rngmod
from qergodic.spectra import sample_nonresonant_spectrum


@pytest.fixture
def gen():
    return rngmod.stream(1234)


def random_triple(D, dims, seed, trial=0):
    """(spectrum, decomposition, psi0) drawn from independent streams."""
    from qergodic.sampling import random_decomposition, uniform_sphere_state

    spec = sample_nonresonant_spectrum(D, (0.0, 1.0), rngmod.stream(seed, trial, rngmod.SPECTRUM))
    decomp = random_decomposition(dims, rngmod.stream(seed, trial, rngmod.DECOMPOSITION))
    psi0 = uniform_sphere_state(D, rngmod.stream(seed, trial, rngmod.STATES))
    return spec, decomp, psi0


def basis_state(D, a):
    v = np.zeros(D, dtype=complex)
    v[a] = 1.0
    return v


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
