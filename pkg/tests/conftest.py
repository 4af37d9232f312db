import numpy as np
import pytest

from mimo_pareto import ChannelSet, reference_channels
from mimo_pareto.iaa import sweep
from mimo_pareto.keypoints import key_points

SWEEP_TARGETS = 49


def random_channel(rng, n_r=2, n_t=3, snr_db=10.0):
    def mat():
        return (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / np.sqrt(2)

    return ChannelSet.from_snr_db(mat(), mat(), mat(), mat(), snr_db)


def random_unit(rng, n):
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return z / np.linalg.norm(z)


@pytest.fixture(scope="session")
def ref_channel():
    return reference_channels()


@pytest.fixture(scope="session")
def ref_keypoints(ref_channel):
    return key_points(ref_channel)


@pytest.fixture(scope="session")
def ref_sweep(ref_channel):
    """The 49-target run on the reference channel, shared by several suites."""
    return sweep(ref_channel, SWEEP_TARGETS)


# acceptance results, filled by test_acceptance.py and printed after the run
ACCEPTANCE = {}


def record(criterion, passed, stat):
    ACCEPTANCE[criterion] = (bool(passed), stat)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, stat = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {n}: {stat}")
