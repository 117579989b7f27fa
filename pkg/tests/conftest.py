import numpy as np
import pytest
from hypothesis import settings

from qcompare.sampling import sample_qubit_bloch, sample_qudit_matrices
from qcompare.states import DensityMatrix, matrix_from_bloch_coords

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_qubit(rng, measure="hs"):
    r = sample_qubit_bloch(measure, rng, 1)[0]
    return DensityMatrix(matrix_from_bloch_coords(r, 2))


def random_state(rng, d, measure="hs"):
    if d == 2:
        return random_qubit(rng, measure)
    return DensityMatrix(sample_qudit_matrices(measure, d, rng, 1)[0])


def random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
