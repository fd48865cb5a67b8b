import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from swipt_secrecy.channel import ChannelSet, generate_channels

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=300, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_channel():
    return generate_channels(4, 3, 2, 0)


@pytest.fixture
def orthogonal_channel():
    """User on antenna 1, a single eavesdropper on antenna 2."""
    return ChannelSet(np.array([1.0, 0.0]), np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]]))


def random_hermitian(rng, n, psd=False):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    if psd:
        return A @ A.conj().T
    return 0.5 * (A + A.conj().T)


# -- acceptance bookkeeping -------------------------------------------------------
# Each acceptance test records (criterion, passed, detail); a criterion split over
# several tests passes only if every part passed.  Lines are printed at the end of
# the session so they show up in captured runs as well.

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail):
        _ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[crit]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {detail}")
