import numpy as np
import pytest

from haarsr.haar import analyze
from haarsr.imaging import ObservationSet
from haarsr.shiftop import DyadicShift, oracle_shift

DATA = __import__("pathlib").Path(__file__).parent / "data"


def make_set(hr, shifts) -> ObservationSet:
    """Noiseless observations of ``hr`` under the given dyadic shifts."""
    return ObservationSet(
        reference=analyze(hr).A,
        shifted=tuple(oracle_shift(hr, s) for s in shifts),
        shifts=tuple(shifts),
        ground_truth=hr,
    )


def interior_error(est, truth, k=1):
    """Max-abs subband error away from the last ``k`` rows and columns."""
    return max(
        np.abs(getattr(est, b)[:-k, :-k] - getattr(truth, b)[:-k, :-k]).max() for b in "HVD"
    )


CASE1 = (DyadicShift(8, 0), DyadicShift(0, 8), DyadicShift(8, 8))
CASE2 = (DyadicShift(16, 0), DyadicShift(8, 8), DyadicShift(16, 8))
CASE3 = (DyadicShift(0, 16), DyadicShift(8, 8), DyadicShift(8, 16))
CASE4 = (DyadicShift(8, 8), DyadicShift(16, 8), DyadicShift(8, 16))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
